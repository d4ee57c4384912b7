"""Numeracy probing: synthetic numbers, probe tasks, probe training and metrics."""

from numlex.probing.gen import NumberGenConfig, generate_numbers, render_number
from numlex.probing.probe import (
    Probe,
    ProbeConfig,
    ProbeMetrics,
    ProbeResult,
    compare_embedders,
    evaluate,
    probe_tasks,
    run_probe,
    split_tasks,
    train_probe,
)
from numlex.probing.tasks import ProbeTask, TaskKind, make_task, read_tasks, write_tasks

__all__ = [
    "NumberGenConfig", "generate_numbers", "render_number", "Probe", "ProbeConfig", "ProbeMetrics",
    "ProbeResult", "compare_embedders", "evaluate", "probe_tasks", "run_probe", "split_tasks", "train_probe",
    "ProbeTask", "TaskKind", "make_task", "read_tasks", "write_tasks",
]
