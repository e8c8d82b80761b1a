from hypothesis import given, settings, strategies as st

from helpers import ALL_SCHEMES, coherence_scenario, replay_oracle


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_every_scheme_matches_the_replay_oracle(seed):
    system, result, trace, content, npages = coherence_scenario(seed, schemes=ALL_SCHEMES)
    pages = range(npages)
    assert system.memory_image(pages) == replay_oracle(trace, content, pages)
    assert result.counters["completions"] == len(trace)
    assert system.engine.idle
