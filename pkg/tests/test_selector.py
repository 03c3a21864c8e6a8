import math

import pytest

from promptbot.backends import LookupBackend, UniformBackend
from promptbot.errors import ConfigurationError, SelectionError
from promptbot.model import Dialogue, Turn
from promptbot.prompts import SHOT_SEPARATOR, PromptText, render_skill_history
from promptbot.selector import (
    SelectionSample,
    SkillPromptSet,
    build_prompt_set,
    build_selection_dataset,
    evaluate_selector,
    select_skill,
)


def dialogue(label: str, *texts: str) -> Dialogue:
    speakers = ["user", "assistant"]
    turns = [Turn(speakers[i % 2], t) for i, t in enumerate(texts)]
    return Dialogue(id=f"{label}-0", task=label, turns=turns)


def history(*texts: str) -> Dialogue:
    return dialogue("chat", *texts)


POOLS = {
    "alpha": [dialogue("alpha", "apples are tasty", "indeed they are")],
    "beta": [dialogue("beta", "bears are large", "very large")],
    "gamma": [dialogue("gamma", "gulls are loud", "quite loud")],
}


def boosted_backend(prompts: SkillPromptSet, query: Dialogue, winner: str) -> LookupBackend:
    rendered = render_skill_history(query)
    head, _, last = rendered.rpartition(" ")
    key = prompts.prompts[winner].text + SHOT_SEPARATOR + head + " "
    return LookupBackend(table={key: {last: 0.5}}, default_prob=0.001)


class TestPromptSet:
    def test_build_joins_shots_with_blank_line(self):
        two = {"alpha": POOLS["alpha"] * 2}
        prompts = build_prompt_set(two)
        assert prompts.prompts["alpha"].shot_count == 2
        assert prompts.prompts["alpha"].text.count(SHOT_SEPARATOR) == 1

    def test_empty_pool_rejected(self):
        with pytest.raises(ConfigurationError):
            build_prompt_set({"alpha": []})

    def test_duplicate_label_rejected(self):
        prompts = SkillPromptSet()
        prompts.add("a", PromptText("x", 1, 1))
        with pytest.raises(ConfigurationError):
            prompts.add("a", PromptText("y", 1, 1))


class TestSelectSkill:
    def test_boosted_label_wins(self):
        prompts = build_prompt_set(POOLS)
        query = history("tell me about bears")
        backend = boosted_backend(prompts, query, "beta")
        result = select_skill(query, prompts, backend)
        assert result.label == "beta"
        assert set(result.scores) == {"alpha", "beta", "gamma"}
        margin = result.scores["beta"] - result.scores["alpha"]
        assert margin == pytest.approx(math.log(0.5) - math.log(0.001))

    def test_tie_goes_to_first_registered(self):
        prompts = build_prompt_set(POOLS)
        result = select_skill(history("hello there"), prompts, UniformBackend(50))
        assert len(set(result.scores.values())) == 1
        assert result.label == "alpha"

    def test_empty_prompt_set_rejected(self):
        with pytest.raises(ConfigurationError):
            select_skill(history("hi"), SkillPromptSet(), UniformBackend(5))

    def test_backend_failure_names_the_label(self):
        class Exploding:
            def score(self, context, continuation):
                raise RuntimeError("boom")

        prompts = build_prompt_set(POOLS)
        with pytest.raises(SelectionError) as err:
            select_skill(history("hi"), prompts, Exploding())
        assert err.value.label in POOLS


class TestSelectionDataset:
    def pools(self, n: int) -> dict:
        def make(label: str, i: int) -> Dialogue:
            return Dialogue(
                id=f"{label}-{i}",
                task=label,
                turns=[
                    Turn("user", f"{label} line {i}"),
                    Turn("assistant", "reply"),
                    Turn("user", f"{label} more {i}"),
                ],
            )

        return {label: [make(label, i) for i in range(n)] for label in ("alpha", "beta")}

    def test_prompt_and_test_disjoint(self):
        ds = build_selection_dataset(self.pools(6), k=2, test_k=2, seed=7)
        prompt_ids = {d.id for pool in ds.prompt_dialogues.values() for d in pool}
        test_ids = {s.history.id.split("#")[0] for s in ds.test}
        assert not prompt_ids & test_ids
        assert len(ds.prompts) == 2

    def test_samples_end_on_user_turns(self):
        ds = build_selection_dataset(self.pools(4), k=1, test_k=1, seed=3)
        for sample in ds.train + ds.val + ds.test:
            assert sample.history.turns[-1].speaker == "user"

    def test_seed_determinism(self):
        a = build_selection_dataset(self.pools(8), k=2, test_k=2, seed=11)
        b = build_selection_dataset(self.pools(8), k=2, test_k=2, seed=11)
        assert [d.id for d in a.prompt_dialogues["alpha"]] == [
            d.id for d in b.prompt_dialogues["alpha"]
        ]
        c = build_selection_dataset(self.pools(8), k=2, test_k=2, seed=12)
        assert any(
            [d.id for d in a.prompt_dialogues[l]] != [d.id for d in c.prompt_dialogues[l]]
            for l in ("alpha", "beta")
        )

    def test_pool_too_small_rejected(self):
        with pytest.raises(ConfigurationError):
            build_selection_dataset(self.pools(3), k=2, test_k=2, seed=1)


class TestEvaluateSelector:
    def test_always_first_label_confusion(self):
        prompts = build_prompt_set(POOLS)
        samples = [
            SelectionSample(history("anything"), "alpha"),
            SelectionSample(history("something"), "beta"),
            SelectionSample(history("whatever"), "gamma"),
        ]
        report = evaluate_selector(samples, prompts, UniformBackend(50))
        assert report.accuracy == pytest.approx(1 / 3)
        # alpha: p=1/3 r=1 f1=1/2; beta and gamma: 0
        assert report.macro_f1 == pytest.approx(0.5 / 3)
        assert report.confusion["beta"]["alpha"] == 1

    def test_unknown_sample_label_rejected(self):
        prompts = build_prompt_set(POOLS)
        with pytest.raises(ConfigurationError):
            evaluate_selector(
                [SelectionSample(history("x"), "delta")], prompts, UniformBackend(5)
            )

    def test_no_samples_rejected(self):
        prompts = build_prompt_set(POOLS)
        with pytest.raises(ConfigurationError):
            evaluate_selector([], prompts, UniformBackend(5))
