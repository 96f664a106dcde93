"""Node-level placement inside one allocation.

Multi-node jobs take whole empty nodes, largest first. Single-node jobs
co-schedule onto shared nodes subject to core and GPU headroom and to the
packing rule: a node never hosts more residents than the smallest
node_packing_count among them, so a job that asked to run alone is never
crowded by one that allows sharing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from fedflow.core.records import JobRecord


@dataclass
class NodeResource:
    node_id: int
    cores: int
    gpus: float
    residents: dict[int, JobRecord] = field(default_factory=dict)
    exclusive_job: int | None = None

    @property
    def busy(self) -> bool:
        return self.exclusive_job is not None or bool(self.residents)

    def cores_free(self) -> int:
        return self.cores - sum(
            j.resources.cores_per_node_needed() for j in self.residents.values()
        )

    def gpus_free(self) -> float:
        return self.gpus - sum(
            j.resources.gpus_per_node_needed() for j in self.residents.values()
        )

    def admits(self, job: JobRecord, max_residents: int | None = None) -> bool:
        if self.exclusive_job is not None:
            return False
        spec = job.resources
        if spec.cores_per_node_needed() > self.cores_free():
            return False
        if spec.gpus_per_node_needed() > self.gpus_free():
            return False
        packing_cap = min(
            [spec.node_packing_count]
            + [r.resources.node_packing_count for r in self.residents.values()]
        )
        if max_residents is not None:
            packing_cap = min(packing_cap, max_residents)
        return len(self.residents) + 1 <= packing_cap

    def add(self, job: JobRecord) -> None:
        self.residents[job.job_id] = job

    def remove(self, job_id: int) -> None:
        self.residents.pop(job_id, None)
        if self.exclusive_job == job_id:
            self.exclusive_job = None

    def free_fraction(self) -> float:
        if self.exclusive_job is not None:
            return 0.0
        if not self.residents:
            return 1.0
        packing_cap = min(r.resources.node_packing_count for r in self.residents.values())
        return max(0.0, 1.0 - len(self.residents) / packing_cap)


def make_nodes(num_nodes: int, cores_per_node: int, gpus_per_node: float) -> list[NodeResource]:
    return [NodeResource(node_id=i, cores=cores_per_node, gpus=gpus_per_node)
            for i in range(num_nodes)]


def pack_assignments(
    jobs: list[JobRecord],
    nodes: list[NodeResource],
    max_residents: int | None = None,
) -> tuple[list[tuple[JobRecord, list[int]]], list[JobRecord]]:
    """Greedy placement; returns (assignments, jobs that did not fit).

    Placement mutates node occupancy, so callers release nodes via
    ``NodeResource.remove`` when a job ends. ``max_residents`` tightens the
    per-node co-schedule limit below what packing counts allow; node-resident
    launchers pass 1 so each node runs a sequential task stream.
    """
    placed: list[tuple[JobRecord, list[int]]] = []
    leftover: list[JobRecord] = []

    multi = sorted(
        (j for j in jobs if j.resources.num_nodes > 1),
        key=lambda j: -j.resources.num_nodes,
    )
    single = [j for j in jobs if j.resources.num_nodes == 1]

    for job in multi:
        empty = [n for n in nodes if not n.busy]
        need = job.resources.num_nodes
        if len(empty) < need:
            leftover.append(job)
            continue
        chosen = empty[:need]
        for node in chosen:
            node.exclusive_job = job.job_id
        placed.append((job, [n.node_id for n in chosen]))

    for job in single:
        target = next((n for n in nodes if n.admits(job, max_residents)), None)
        if target is None:
            leftover.append(job)
            continue
        target.add(job)
        placed.append((job, [target.node_id]))

    return placed, leftover
