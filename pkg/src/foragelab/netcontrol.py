"""NEAT genomes, recurrent network evaluation and the sensor/actuator codec.

Networks may contain arbitrary cycles, including self-loops. They are
evaluated by synchronous sampling: each control tick runs a fixed number of
update rounds in which every non-input node reads the *previous* round's
activations, so evaluation order never matters. Activations persist from one
tick to the next within a trial.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels as K
from .channels import N_CHANNELS, AblationMask
from .errors import ContractViolation, GenomeFormatError, InterfaceMismatchError
from .world import ActuatorCommand, SensorFrame, WorldState, sense_array

GENOME_SCHEMA = "forage-lab/genome"
GENOME_VERSION = 1

N_INPUTS = N_CHANNELS
N_OUTPUTS = 3
INPUT_IDS = tuple(range(N_INPUTS))
BIAS_ID = N_INPUTS
OUTPUT_IDS = (BIAS_ID + 1, BIAS_ID + 2, BIAS_ID + 3)
FIRST_HIDDEN_ID = OUTPUT_IDS[-1] + 1


class NodeKind(str, Enum):
    INPUT = "input"
    OUTPUT = "output"
    HIDDEN = "hidden"
    BIAS = "bias"


@dataclass(frozen=True)
class NodeGene:
    id: int
    kind: NodeKind


@dataclass(frozen=True)
class ConnectionGene:
    from_id: int
    to_id: int
    weight: float
    enabled: bool
    innovation: int

    def with_weight(self, weight: float) -> ConnectionGene:
        return ConnectionGene(self.from_id, self.to_id, float(weight), self.enabled, self.innovation)

    def with_enabled(self, enabled: bool) -> ConnectionGene:
        return ConnectionGene(self.from_id, self.to_id, self.weight, bool(enabled), self.innovation)


@dataclass
class Genome:
    nodes: list[NodeGene]
    connections: list[ConnectionGene]
    fitness: float | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = sorted(self.nodes, key=lambda n: n.id)
        self.connections = sorted(self.connections, key=lambda c: c.innovation)

    def copy(self) -> Genome:
        return Genome(list(self.nodes), list(self.connections), self.fitness, dict(self.meta))

    def node_ids(self, kind: NodeKind | None = None) -> list[int]:
        return [n.id for n in self.nodes if kind is None or n.kind == kind]

    @property
    def kinds(self) -> dict[int, NodeKind]:
        return {n.id: n.kind for n in self.nodes}

    def validate(self) -> None:
        """Raise :class:`ContractViolation` if a structural invariant is broken."""
        kinds: dict[int, NodeKind] = {}
        for n in self.nodes:
            if n.id in kinds:
                raise ContractViolation(f"duplicate node id {n.id}")
            kinds[n.id] = n.kind
        if sum(k == NodeKind.BIAS for k in kinds.values()) > 1:
            raise ContractViolation("more than one bias node")
        pairs: set[tuple[int, int]] = set()
        innovations: set[int] = set()
        for c in self.connections:
            if c.from_id not in kinds or c.to_id not in kinds:
                raise ContractViolation(f"connection {c.innovation} references a missing node")
            if kinds[c.to_id] in (NodeKind.INPUT, NodeKind.BIAS):
                raise ContractViolation(f"connection {c.innovation} feeds into {kinds[c.to_id].value} node {c.to_id}")
            if (c.from_id, c.to_id) in pairs:
                raise ContractViolation(f"duplicate connection {c.from_id}->{c.to_id}")
            if c.innovation in innovations:
                raise ContractViolation(f"duplicate innovation number {c.innovation}")
            if not np.isfinite(c.weight):
                raise ContractViolation(f"connection {c.innovation} has non-finite weight")
            pairs.add((c.from_id, c.to_id))
            innovations.add(c.innovation)

    def check_interface(self) -> None:
        """Raise :class:`InterfaceMismatchError` unless this is a 15-in / 3-out controller."""
        n_in = len(self.node_ids(NodeKind.INPUT))
        n_out = len(self.node_ids(NodeKind.OUTPUT))
        if n_in != N_INPUTS or n_out != N_OUTPUTS:
            raise InterfaceMismatchError(
                f"controller needs {N_INPUTS} inputs and {N_OUTPUTS} outputs, "
                f"genome has {n_in} inputs and {n_out} outputs"
            )


def interface_nodes(use_bias: bool = True) -> list[NodeGene]:
    """The fixed input/bias/output node set every controller genome starts with."""
    nodes = [NodeGene(i, NodeKind.INPUT) for i in INPUT_IDS]
    if use_bias:
        nodes.append(NodeGene(BIAS_ID, NodeKind.BIAS))
    nodes += [NodeGene(i, NodeKind.OUTPUT) for i in OUTPUT_IDS]
    return nodes


@dataclass(frozen=True)
class NetworkConfig:
    passes: int = 3
    sigmoid_slope: float = 4.9
    lay_threshold: float = 0.5
    use_bias: bool = True

    def __post_init__(self):
        if self.passes < 1:
            raise ContractViolation(f"network.passes must be >= 1, got {self.passes}")


@dataclass(frozen=True)
class NetworkState:
    """Activation of every hidden and output node, keyed by node id."""

    activation: Mapping[int, float]


class Network:
    """A genome flattened into index arrays for the compiled evaluator."""

    def __init__(self, genome: Genome):
        genome.validate()
        self.node_ids = [n.id for n in genome.nodes]
        index = {nid: i for i, nid in enumerate(self.node_ids)}
        kinds = genome.kinds
        self.input_ids = genome.node_ids(NodeKind.INPUT)
        self.output_ids = genome.node_ids(NodeKind.OUTPUT)
        self.free_ids = [n.id for n in genome.nodes if n.kind in (NodeKind.HIDDEN, NodeKind.OUTPUT)]
        bias = genome.node_ids(NodeKind.BIAS)
        self.input_idx = np.array([index[i] for i in self.input_ids], dtype=np.int64)
        self.output_idx = np.array([index[i] for i in self.output_ids], dtype=np.int64)
        self.free_idx = np.array([index[i] for i in self.free_ids], dtype=np.int64)
        self.bias_idx = index[bias[0]] if bias else -1
        live = [c for c in genome.connections
                if c.enabled and kinds[c.to_id] not in (NodeKind.INPUT, NodeKind.BIAS)]
        self.src = np.array([index[c.from_id] for c in live], dtype=np.int64)
        self.dst = np.array([index[c.to_id] for c in live], dtype=np.int64)
        self.weight = np.array([c.weight for c in live], dtype=np.float64)
        self.n_nodes = len(self.node_ids)

    @property
    def n_inputs(self) -> int:
        return len(self.input_ids)

    def fresh_state(self) -> NetworkState:
        return NetworkState({nid: 0.5 for nid in self.free_ids})

    def state_to_array(self, state: NetworkState) -> np.ndarray:
        act = np.zeros(self.n_nodes)
        for nid, i in zip(self.free_ids, self.free_idx):
            act[i] = state.activation[nid]
        return act

    def array_to_state(self, act: np.ndarray) -> NetworkState:
        return NetworkState({nid: float(act[i]) for nid, i in zip(self.free_ids, self.free_idx)})

    def kernel_args(self) -> tuple:
        return (self.n_nodes, self.input_idx, self.bias_idx, self.output_idx, self.free_idx,
                self.src, self.dst, self.weight)


def as_network(genome: Genome | Network) -> Network:
    return genome if isinstance(genome, Network) else Network(genome)


def sigmoid(x: float | np.ndarray, slope: float = 4.9):
    return 1.0 / (1.0 + np.exp(-slope * np.asarray(x, dtype=np.float64)))


def evaluate(genome: Genome | Network, state: NetworkState | None, inputs: Sequence[float],
             passes: int = 3, slope: float = 4.9) -> tuple[np.ndarray, NetworkState]:
    """Run ``passes`` synchronous update rounds; return output activations and the new state.

    ``state`` of ``None`` means a fresh network (every non-input node at 0.5).
    """
    net = as_network(genome)
    x = np.asarray(inputs, dtype=np.float64).ravel()
    if x.shape[0] != net.n_inputs:
        raise ContractViolation(f"network has {net.n_inputs} inputs, got {x.shape[0]} values")
    if passes < 1:
        raise ContractViolation(f"passes must be >= 1, got {passes}")
    act = net.state_to_array(state if state is not None else net.fresh_state())
    acc = np.empty(net.n_nodes)
    K.propagate(act, x, net.input_idx, net.bias_idx, net.free_idx, net.src, net.dst, net.weight,
                passes, slope, acc)
    return act[net.output_idx].copy(), net.array_to_state(act)


def encode_sensors(frame: SensorFrame | Sequence[float], mask: AblationMask) -> np.ndarray:
    """15 input scalars in canonical channel order with disabled groups replaced."""
    a = frame.to_array() if isinstance(frame, SensorFrame) else np.asarray(frame, dtype=np.float64)
    if a.shape != (N_CHANNELS,):
        raise ContractViolation(f"expected {N_CHANNELS} sensor scalars, got shape {a.shape}")
    return mask.apply(a)


def decode_actuators(outputs: Sequence[float], lay_threshold: float = 0.5) -> ActuatorCommand:
    o = np.asarray(outputs, dtype=np.float64)
    if o.shape != (N_OUTPUTS,):
        raise ContractViolation(f"expected {N_OUTPUTS} outputs, got shape {o.shape}")
    if np.any((o < 0.0) | (o > 1.0)) or not np.all(np.isfinite(o)):
        raise ContractViolation(f"network outputs must lie in [0, 1], got {o.tolist()}")
    cmd = np.zeros((1, 3))
    K.decode(o[0], o[1], o[2], lay_threshold, cmd, 0)
    return ActuatorCommand(float(cmd[0, 0]), float(cmd[0, 1]), bool(cmd[0, 2] > 0.0))


def control_tick(genome: Genome | Network, net_state: NetworkState | None, world: WorldState,
                 robot_index: int, mask: AblationMask,
                 network: NetworkConfig = NetworkConfig()) -> tuple[ActuatorCommand, NetworkState]:
    """sense -> encode -> evaluate -> decode for one robot."""
    net = as_network(genome)
    if net.n_inputs != N_INPUTS or len(net.output_ids) != N_OUTPUTS:
        raise InterfaceMismatchError(
            f"controller needs {N_INPUTS} inputs and {N_OUTPUTS} outputs, "
            f"got {net.n_inputs} and {len(net.output_ids)}"
        )
    inputs = encode_sensors(sense_array(world, robot_index), mask)
    outputs, new_state = evaluate(net, net_state, inputs, network.passes, network.sigmoid_slope)
    return decode_actuators(outputs, network.lay_threshold), new_state


# -- genome files -----------------------------------------------------------

def genome_to_dict(genome: Genome) -> dict[str, Any]:
    return {
        "schema": GENOME_SCHEMA,
        "schema_version": GENOME_VERSION,
        "fitness": genome.fitness,
        "meta": genome.meta,
        "nodes": [{"id": n.id, "kind": n.kind.value} for n in genome.nodes],
        "connections": [
            {"from": c.from_id, "to": c.to_id, "weight": c.weight, "enabled": c.enabled,
             "innovation": c.innovation}
            for c in genome.connections
        ],
    }


def dumps_genome(genome: Genome) -> str:
    return json.dumps(genome_to_dict(genome), indent=1) + "\n"


def _require(obj: Mapping[str, Any], key: str, types: type | tuple, where: str) -> Any:
    if key not in obj:
        raise GenomeFormatError(f"{where}: missing key {key!r}")
    v = obj[key]
    if isinstance(v, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise GenomeFormatError(f"{where}.{key}: expected {types}, got bool")
    if not isinstance(v, types):
        raise GenomeFormatError(f"{where}.{key}: expected {types}, got {type(v).__name__}")
    return v


def genome_from_dict(data: Any) -> Genome:
    if not isinstance(data, dict):
        raise GenomeFormatError("genome document must be a JSON object")
    if data.get("schema") != GENOME_SCHEMA:
        raise GenomeFormatError(f"not a genome file (schema {data.get('schema')!r})")
    if data.get("schema_version") != GENOME_VERSION:
        raise GenomeFormatError(f"unsupported genome schema_version {data.get('schema_version')!r}")
    nodes = []
    for i, n in enumerate(_require(data, "nodes", list, "genome")):
        where = f"nodes[{i}]"
        if not isinstance(n, dict):
            raise GenomeFormatError(f"{where}: expected an object")
        kind = _require(n, "kind", str, where)
        try:
            nodes.append(NodeGene(_require(n, "id", int, where), NodeKind(kind)))
        except ValueError:
            raise GenomeFormatError(f"{where}.kind: unknown node kind {kind!r}") from None
    conns = []
    for i, c in enumerate(_require(data, "connections", list, "genome")):
        where = f"connections[{i}]"
        if not isinstance(c, dict):
            raise GenomeFormatError(f"{where}: expected an object")
        conns.append(ConnectionGene(
            _require(c, "from", int, where), _require(c, "to", int, where),
            float(_require(c, "weight", (int, float), where)),
            _require(c, "enabled", bool, where), _require(c, "innovation", int, where),
        ))
    fitness = data.get("fitness")
    genome = Genome(nodes, conns, None if fitness is None else float(fitness), dict(data.get("meta") or {}))
    try:
        genome.validate()
    except ContractViolation as e:
        raise GenomeFormatError(f"invalid genome: {e}") from None
    return genome


def parse_json_bytes(raw: bytes, what: str) -> Any:
    """Decode JSON, converting decoder positions into byte offsets."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise GenomeFormatError(f"{what} is not UTF-8", e.start) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[:e.pos].encode("utf-8"))
        raise GenomeFormatError(f"malformed {what}: {e.msg}", offset) from None


def loads_genome(raw: str | bytes) -> Genome:
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    return genome_from_dict(parse_json_bytes(raw, "genome"))


def save_genome(genome: Genome, path: str | Path) -> None:
    Path(path).write_text(dumps_genome(genome))


def load_genome(path: str | Path) -> Genome:
    return loads_genome(Path(path).read_bytes())


def build_genome(node_kinds: Mapping[int, str | NodeKind],
                 links: Iterable[tuple[int, int, float]]) -> Genome:
    """Small hand-built genomes: ``links`` are ``(from, to, weight)``, innovations in order."""
    nodes = [NodeGene(i, NodeKind(k)) for i, k in node_kinds.items()]
    conns = [ConnectionGene(a, b, float(w), True, i) for i, (a, b, w) in enumerate(links)]
    g = Genome(nodes, conns)
    g.validate()
    return g
