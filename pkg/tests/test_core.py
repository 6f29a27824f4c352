"""Core types: threshold rule, descriptors, contexts, weights."""

import pytest

from dlslab import (
    Chunk,
    ExecutionContext,
    InvalidParameters,
    LoopDescriptor,
    ThreadWeights,
    UnknownTechnique,
    WorkloadProfile,
    apply_chunk_threshold,
)


def test_threshold_lifts_small_chunks():
    assert apply_chunk_threshold(3, 100, 10) == 10
    assert apply_chunk_threshold(0, 100, 7) == 7


def test_threshold_keeps_large_chunks():
    assert apply_chunk_threshold(42, 100, 10) == 42


def test_threshold_clamps_to_remaining():
    assert apply_chunk_threshold(42, 5, 10) == 5
    assert apply_chunk_threshold(3, 5, 10) == 5


def test_threshold_exact_boundaries():
    assert apply_chunk_threshold(10, 10, 10) == 10
    assert apply_chunk_threshold(1, 1, 1) == 1


def test_threshold_rejects_bad_arguments():
    with pytest.raises(InvalidParameters):
        apply_chunk_threshold(-1, 10, 1)
    with pytest.raises(InvalidParameters):
        apply_chunk_threshold(5, 0, 1)
    with pytest.raises(InvalidParameters):
        apply_chunk_threshold(5, 10, 0)


def test_loop_descriptor_validation():
    d = LoopDescriptor("ok", 10)
    assert d.time_steps == 1
    with pytest.raises(InvalidParameters):
        LoopDescriptor("bad", 0)
    with pytest.raises(InvalidParameters):
        LoopDescriptor("bad", 10, time_steps=0)


def test_workload_profile_validation():
    WorkloadProfile(mu=1.0, sigma=0.0)
    with pytest.raises(InvalidParameters):
        WorkloadProfile(mu=0.0, sigma=1.0)
    with pytest.raises(InvalidParameters):
        WorkloadProfile(mu=1.0, sigma=-1.0)
    with pytest.raises(InvalidParameters):
        WorkloadProfile(mu=1.0, sigma=1.0, h=-1e-9)


def test_thread_weights_normalize_to_p():
    w = ThreadWeights([2.0, 2.0, 4.0, 8.0])
    assert abs(sum(w) - 4.0) < 1e-12
    assert w[3] == 2.0  # 8/16 * 4
    assert len(w) == 4


def test_thread_weights_reject_nonpositive():
    with pytest.raises(InvalidParameters):
        ThreadWeights([1.0, 0.0])
    with pytest.raises(InvalidParameters):
        ThreadWeights([])


def test_uniform_weights():
    assert list(ThreadWeights.uniform(3)) == [1.0, 1.0, 1.0]


def test_execution_context_normalizes_technique():
    ctx = ExecutionContext(p=4, technique="GSS")
    assert ctx.technique == "gss"
    ctx = ExecutionContext(p=4, technique="AWF_B")
    assert ctx.technique == "awf-b"


def test_execution_context_rejects_unknown_technique():
    with pytest.raises(UnknownTechnique) as info:
        ExecutionContext(p=4, technique="mystery")
    assert "gss" in str(info.value)


def test_execution_context_validation():
    with pytest.raises(InvalidParameters):
        ExecutionContext(p=0, technique="ss")
    with pytest.raises(InvalidParameters):
        ExecutionContext(p=2, technique="ss", chunk_param=0)
    with pytest.raises(InvalidParameters):
        ExecutionContext(p=2, technique="wf2",
                         weights=ThreadWeights([1.0, 1.0, 1.0]))


def test_chunk_stop():
    c = Chunk(start=10, size=5, thread=0)
    assert c.stop == 15
    assert c.batch is None
