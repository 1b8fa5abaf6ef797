"""PRISM-language export."""

from fractions import Fraction

from dispersal_mc import ModelParams, uniform_probabilities, lt_linear_profile
from dispersal_mc.models import (build_client, build_provider_attacker,
                                 build_slice_attacker)
from dispersal_mc.prism import export_prism

F = Fraction


def minimal_params():
    return ModelParams(n=1, m=1, c=1, k1=1, k2=1, a=(F(3, 10),),
                       x=(F(1),), p=(F(1),))


class TestExport:
    def test_minimal_config_has_one_busy_pair(self):
        text = export_prism(minimal_params(), "slice")
        assert text.count("[busy]") == 2
        assert text.startswith("mdp\n")
        assert 'label "hacked" = pc_a=2;' in text

    def test_deterministic_bytes(self):
        params = ModelParams(n=3, m=2, c=2, k1=2, k2=3, a=(F(1, 10), F(1, 5)),
                             x=lt_linear_profile(2, 3, 3),
                             p=uniform_probabilities(2))
        assert export_prism(params, "provider") == export_prism(params, "provider")

    def test_commands_in_bijection_with_templates(self):
        params = ModelParams(n=4, m=2, c=2, k1=2, k2=3, a=(F(1, 10), F(1, 5)),
                             x=lt_linear_profile(2, 3, 4),
                             p=uniform_probabilities(2))
        for attacker, builder in (("slice", build_slice_attacker),
                                  ("provider", build_provider_attacker)):
            text = export_prism(params, attacker)
            commands = [line.strip() for line in text.splitlines()
                        if line.strip().startswith("[")]
            templates = (list(build_client(params).templates)
                         + list(builder(params).templates))
            assert len(commands) == len(templates)
            exported_actions = sorted(line.split("]")[0][1:] for line in commands)
            assert exported_actions == sorted(t.action for t in templates)

    def test_probabilities_rendered_as_rationals(self):
        text = export_prism(minimal_params(), "slice")
        assert "3/10" in text and "7/10" in text
        assert "0.3" not in text

    def test_provider_export_mentions_flags_and_gate(self):
        params = ModelParams(n=2, m=2, c=2, k1=2, k2=2, a=(F(1, 2), F(1, 2)),
                             x=(F(1),), p=uniform_probabilities(2))
        text = export_prism(params, "provider")
        assert "att_a_1 : [0..1] init 0;" in text
        assert "ctr_c=2" in text          # reconstruction gated on completion
        assert 'label "hacked" = pc_a=3;' in text
