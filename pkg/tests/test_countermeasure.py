import numpy as np
import pytest

from app.adversarial.histograms import amplitude_histogram
from app.aes.codegen import memory_image, round_output
from app.aes.reference import round_one_state
from app.countermeasure.insertion import ProtectedProgram, insert_noise, protect, random_noise_program
from app.countermeasure.locate import annotate_source, locate_insertion_points, probe_sentinel
from app.countermeasure.models import InsertionPoint, InsertionPolicy, NoiseSet
from app.countermeasure.selection import (
    LISTING_NOISE,
    candidate_pool,
    realizable_amplitude_bounds,
    select_noise_instructions,
    select_target_intervals,
)
from app.errors import CountermeasureError
from app.vm.assembler import assemble, parse_instruction
from app.vm.executor import execute
from app.vm.models import DeviceConfig

BIN_WIDTH = 10.0 / 160
NOISE = NoiseSet(members=[parse_instruction(text) for text in LISTING_NOISE])


def test_probe_lands_three_samples_per_instruction(nop_window, quiet_device):
    program = nop_window(40)
    assert probe_sentinel(program, 0, quiet_device) == 0
    assert probe_sentinel(program, 10, quiet_device) == 30


def test_locate_insertion_points(nop_window, quiet_device):
    points = locate_insertion_points(nop_window(40), [30, 0, 31], quiet_device)
    assert [p.instruction_index for p in points] == [10, 0, 11]
    assert [p.observed_sample for p in points] == [30, 0, 33]
    assert points[0].probes[0].index == 40
    assert all(probe.target_sample == 30 for probe in points[0].probes)
    assert [probe.iteration for probe in points[0].probes] == list(range(len(points[0].probes)))


def test_locate_uses_a_binary_search(nop_window, quiet_device):
    (point,) = locate_insertion_points(nop_window(1000), [1500], quiet_device)
    assert point.instruction_index == 500
    assert len(point.probes) <= 12


def test_unreachable_target(nop_window, quiet_device):
    with pytest.raises(CountermeasureError, match="unreachable"):
        locate_insertion_points(nop_window(10), [1000], quiet_device)


def test_annotate_source_places_slots_after_instructions():
    source = "trigger_high\n; comment\nnop\nnop\ntrigger_low\n"
    annotated = annotate_source(source, [1, 2])
    assert annotated.splitlines() == [
        "trigger_high", "; comment", "nop", ";@noise-slot", "nop", ";@noise-slot", "trigger_low"
    ]
    assert assemble(annotated).annotation_indices() == [2, 3]
    with pytest.raises(CountermeasureError):
        annotate_source(source, [9])


def histogram(values):
    return amplitude_histogram(np.array(values), bins=160, range=(-5.2, 4.8))


def test_target_intervals_cover_the_shared_modes():
    first = histogram([-5.18, -5.18, -5.18, 4.6, 4.6, 1.0])
    second = histogram([-5.0, -5.0, 4.7, 4.7, -2.0])
    low, high = select_target_intervals([first, second])
    assert low[0] == pytest.approx(-5.2, abs=BIN_WIDTH)
    assert low[1] == pytest.approx(-5.0, abs=BIN_WIDTH)
    assert low[0] <= -5.18 and low[1] >= -5.0
    assert high[0] <= 4.6 and high[1] >= 4.7


def test_target_intervals_fall_back_to_the_first_model():
    intervals = select_target_intervals([histogram([-3.0, -3.0]), histogram([2.0])])
    assert len(intervals) == 1
    assert intervals[0][0] <= -3.0 <= intervals[0][1]


def test_target_intervals_need_a_shared_binning():
    with pytest.raises(ValueError):
        select_target_intervals([histogram([1.0]), amplitude_histogram(np.array([1.0]), bins=10)])
    with pytest.raises(ValueError):
        select_target_intervals([])


def test_realizable_amplitude_bounds(unit_stats):
    assert realizable_amplitude_bounds(unit_stats(10), [2, 3], DeviceConfig()) == (0.0, 8.0)


def test_candidate_pool_uses_the_scratch_register():
    pool = candidate_pool(20)
    assert all(x.dst in (20, None) for x in pool)
    assert "ldi r20, 0xff" in {str(x) for x in pool}


def test_noise_selection(nop_window, quiet_device, unit_stats):
    program = nop_window(6)
    point = InsertionPoint(instruction_index=2, target_sample=6, observed_sample=6)
    candidates = [parse_instruction("ldi r24, 0xff"), parse_instruction("nop"), parse_instruction("ldi r24, 0x0f")]
    noise = select_noise_instructions(
        candidates, [point], [(7.0, 9.0)], quiet_device, unit_stats(21), program, repetitions=2
    )
    assert noise.texts == ["ldi r24, 0xff"]
    assert noise.mean_amplitudes() == [pytest.approx(8.0)]

    widened = select_noise_instructions(
        candidates, [point], [(7.0, 9.0)], quiet_device, unit_stats(21), program, repetitions=1, margin=3.5
    )
    assert widened.texts == ["ldi r24, 0xff", "ldi r24, 0x0f"]


def test_noise_selection_compares_the_delta_from_the_baseline(quiet_device, unit_stats):
    # The slot sits over a `ldi r1, 0xff`, so the unprotected program already shows level 8 there
    program = assemble("trigger_high\nnop\nnop\nldi r1, 0xff\nldi r2, 0xff\nnop\nnop\ntrigger_low\n")
    point = InsertionPoint(instruction_index=2, target_sample=6, observed_sample=6)
    candidates = [parse_instruction("ldi r24, 0xff"), parse_instruction("nop")]

    def selected(intervals, criterion):
        return select_noise_instructions(
            candidates, [point], intervals, quiet_device, unit_stats(21), program, repetitions=1, criterion=criterion
        )

    by_delta = selected([(-9.0, -7.0)], "delta")
    assert by_delta.texts == ["nop"]
    assert by_delta.mean_deltas() == [pytest.approx(-8.0)]
    assert by_delta.mean_amplitudes() == [pytest.approx(0.0)]
    assert selected([(7.0, 9.0)], "level").texts == ["ldi r24, 0xff"]
    with pytest.raises(CountermeasureError):
        selected([(7.0, 9.0)], "delta")
    with pytest.raises(CountermeasureError):
        selected([(-9.0, -7.0)], "level")


def test_empty_noise_set(nop_window, quiet_device, unit_stats):
    point = InsertionPoint(instruction_index=2, target_sample=6, observed_sample=6)
    with pytest.raises(CountermeasureError):
        select_noise_instructions(
            [parse_instruction("nop")], [point], [(7.0, 9.0)], quiet_device, unit_stats(21), nop_window(6),
            repetitions=1,
        )


ANNOTATED = "trigger_high\nnop\n;@noise-slot\nnop\n;@noise-slot\nnop\n;@noise-slot\ntrigger_low\n"


@pytest.mark.parametrize("omega, added", [(0, 0), (1, 3), (2, 6)])
def test_insert_noise_adds_omega_instructions_per_slot(omega, added):
    policy = InsertionPolicy(omega_domain=[omega])
    source = insert_noise(ANNOTATED, 3, [parse_instruction("ldi r24, 0xff")], policy, invocation_seed=1)
    program = assemble(source)
    assert len(program) == 5 + added
    assert program.annotations == []
    assert sum(str(x) == "ldi r24, 0xff" for x in program.instructions) == added


def test_insert_noise_is_seeded():
    policy = InsertionPolicy(omega_domain=[0, 1, 2], seed=3)
    sources = [insert_noise(ANNOTATED, 3, NOISE, policy, seed) for seed in range(10)]
    assert sources[0] == insert_noise(ANNOTATED, 3, NOISE, policy, 0)
    assert len(set(sources)) > 1


def slot_omegas(source: str) -> list[int]:
    """Noise instructions after each `nop` of an ANNOTATED-based protected source."""
    omegas = []
    for line in source.splitlines():
        if line == "nop":
            omegas.append(0)
        elif line == "ldi r24, 0xff":
            omegas[-1] += 1
    return omegas


def test_omega_frequencies_are_uniform():
    policy = InsertionPolicy(omega_domain=[0, 1, 2], seed=9)
    noise = [parse_instruction("ldi r24, 0xff")]
    omegas = np.array([slot_omegas(insert_noise(ANNOTATED, 3, noise, policy, seed)) for seed in range(1000)])
    assert omegas.shape == (1000, 3)
    sigma = np.sqrt(1000 * (1 / 3) * (2 / 3))
    for slot in range(3):
        frequencies = np.bincount(omegas[:, slot], minlength=3)
        assert (np.abs(frequencies - 1000 / 3) <= 3 * sigma).all(), (slot, frequencies)


def test_shared_omega_is_the_same_at_every_slot():
    policy = InsertionPolicy(omega_domain=[0, 1, 2], per_point_independent=False, seed=9)
    noise = [parse_instruction("ldi r24, 0xff")]
    omegas = np.array([slot_omegas(insert_noise(ANNOTATED, 3, noise, policy, seed)) for seed in range(300)])
    assert (omegas == omegas[:, :1]).all()
    assert set(omegas[:, 0].tolist()) == {0, 1, 2}


def test_insert_noise_checks_slots_and_noise():
    with pytest.raises(CountermeasureError):
        insert_noise(ANNOTATED, 2, NOISE, InsertionPolicy(), 0)
    with pytest.raises(CountermeasureError):
        insert_noise(ANNOTATED, 3, [], InsertionPolicy(omega_domain=[1]), 0)
    assert "nop" in insert_noise(ANNOTATED, 3, [], InsertionPolicy(omega_domain=[0]), 0)


def protected_aes(aes_program) -> ProtectedProgram:
    points = [InsertionPoint(instruction_index=i, target_sample=-1, observed_sample=-1) for i in (4, 60, 150)]
    return protect(aes_program, points, NOISE, InsertionPolicy(omega_domain=[0, 1, 2], seed=5))


@pytest.mark.parametrize("inputs, invocations", [(50, 10), pytest.param(1000, 100, marks=pytest.mark.slow)])
def test_protection_preserves_the_round_output(aes_program, quiet_device, inputs, invocations):
    protected = protected_aes(aes_program)
    rng = np.random.default_rng(0)
    pairs = [(rng.bytes(16), rng.bytes(16)) for _ in range(inputs)]
    expected = [round_one_state(plaintext, key) for plaintext, key in pairs]
    for seed in rng.integers(0, 2**32, invocations).tolist():
        program = protected.compile(seed)
        for (plaintext, key), state_one in zip(pairs, expected):
            _, state = execute(program, memory_image(plaintext, key), quiet_device)
            assert round_output(state) == state_one, (seed, plaintext.hex(), key.hex())


def test_protected_program_serialization(aes_program):
    protected = protected_aes(aes_program)
    restored = ProtectedProgram.from_dict(protected.to_dict())
    assert restored.source(7) == protected.source(7)
    assert restored.noise_cycles == [1, 1, 1, 1]
    assert assemble(protected.annotated_source).annotation_indices() == [5, 61, 151]


def test_random_noise_program(aes_program, quiet_device):
    policy = InsertionPolicy(omega_domain=[1, 2])
    control = random_noise_program(aes_program, 3, candidate_pool(), policy, seed=2, config=quiet_device)
    assert control.implementation == "random_noise"
    assert len(control.points) == 3
    assert 1 <= len(control.noise) <= len(candidate_pool())
    assert all(point.observed_sample >= 0 for point in control.points)
    program = control.compile(0)
    _, state = execute(program, memory_image(bytes(16), bytes(16)), quiet_device)
    assert round_output(state) == round_one_state(bytes(16), bytes(16))
    assert len(program) >= len(aes_program) + 3
