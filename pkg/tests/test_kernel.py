import itertools

import pytest

from cetalk import ce, kernel
from cetalk.kernel import (
    IS_A,
    Concept,
    Instance,
    Match,
    ModelError,
    Pattern,
    Told,
    UnknownIdError,
)


class TestConcepts:
    def test_subtype_of_parent(self, kb):
        assert kb.is_subtype("helicopter", "vehicle")
        assert not kb.is_subtype("vehicle", "helicopter")

    def test_reflexive(self, kb):
        assert kb.is_subtype("vehicle", "vehicle")

    def test_cycle_rejected(self):
        fresh = kernel.KnowledgeBase()
        with pytest.raises(ModelError, match="cycle"):
            fresh.add_concepts([Concept("a", ("b",)), Concept("b", ("a",))])

    def test_self_parent_rejected(self):
        fresh = kernel.KnowledgeBase()
        with pytest.raises(ModelError, match="cycle"):
            fresh.add_concepts([Concept("a", ("a",))])

    def test_conflicting_redeclaration(self, kb):
        with pytest.raises(ModelError, match="conflicting"):
            kb.add_concept(Concept("helicopter", ("person",)))

    def test_identical_redeclaration_is_noop(self, kb):
        kb.add_concept(Concept("helicopter", ("vehicle",)))

    def test_undeclared_parent(self):
        fresh = kernel.KnowledgeBase()
        with pytest.raises(ModelError, match="undeclared parent"):
            fresh.add_concept(Concept("a", ("ghost",)))

    def test_forward_reference_within_batch(self):
        fresh = kernel.KnowledgeBase()
        fresh.add_concepts([Concept("child", ("base",)), Concept("base")])
        assert fresh.is_subtype("child", "base")

    def test_partial_order_on_small_model(self, kb):
        names = list(kb.concepts)
        for a in names:
            assert kb.is_subtype(a, a)  # reflexive
        for a, b in itertools.permutations(names, 2):
            if kb.is_subtype(a, b) and kb.is_subtype(b, a):
                pytest.fail(f"antisymmetry violated for {a}, {b}")
        for a, b, c in itertools.permutations(names, 3):
            if kb.is_subtype(a, b) and kb.is_subtype(b, c):
                assert kb.is_subtype(a, c)  # transitive


class TestLookup:
    def test_synonym_hits_concept(self, kb):
        assert Match("concept", "vehicle") in kb.lookup_surface(["car"])

    def test_multi_word_property_synonym(self, kb):
        assert kb.lookup_surface(["license", "plate"]) == frozenset(
            {Match("property", "vehicle:registration:value")}
        )

    def test_heading_synonym(self, kb):
        assert kb.lookup_surface(["heading"]) == frozenset(
            {Match("property", "moving thing:direction of travel:direction")}
        )

    def test_unknown_sequence_is_empty(self, kb):
        assert kb.lookup_surface(["frobnicator"]) == frozenset()

    def test_case_folded(self, kb):
        assert kb.lookup_surface(["BLACK"]) == kb.lookup_surface(["black"])

    def test_adding_synonym_never_removes(self, kb):
        before = kb.lookup_surface(["car"])
        kb.add_synonym("car", Match("instance", "black"))
        after = kb.lookup_surface(["car"])
        assert before <= after

    def test_label_lookup(self, kb):
        kb.add_instance(Instance("p9", "person", label="John Smith"))
        assert Match("instance", "p9") in kb.lookup_surface(["john", "smith"])


class TestFreshIds:
    def test_first_person(self, kb):
        assert kb.fresh_id("person") == "p1"

    def test_monotone(self, kb):
        assert [kb.fresh_id("person"), kb.fresh_id("person")] == ["p1", "p2"]

    def test_counts_past_existing(self, kb):
        for i in (1, 2, 3):
            kb.add_instance(Instance(f"p{i}", "person"))
        assert kb.fresh_id("person") == "p4"

    def test_multi_word_concept_uses_initials(self, kb):
        assert kb.fresh_id("suspect sighting") == "ss1"

    def test_never_reissued_across_interleaving(self, kb):
        seen = set()
        for i in range(20):
            new = kb.fresh_id("vehicle")
            assert new not in seen
            seen.add(new)
            if i % 3 == 0:
                kb.add_instance(Instance(new, "vehicle"))
        assert len(seen) == 20

    def test_never_collides_with_loaded_ids(self, kb):
        kb.add_instance(Instance("v48", "vehicle"))
        assert kb.fresh_id("vehicle") == "v49"


class TestFacts:
    def test_assert_and_query(self, kb):
        kb.add_instance(Instance("v48", "vehicle"))
        kb.assert_fact("v48", "registration", "DEF456")
        found = kb.query(Pattern(property="registration", object="DEF456"))
        assert [f.subject for f in found] == ["v48"]

    def test_read_your_writes(self, kb):
        kb.add_instance(Instance("v48", "vehicle"))
        fact = kb.assert_fact("v48", "registration", "DEF456")
        assert kb.query(Pattern("v48", "registration", "DEF456")) == [fact]

    def test_idempotent_duplicate(self, kb):
        kb.add_instance(Instance("v48", "vehicle"))
        first = kb.assert_fact("v48", "registration", "DEF456")
        count = len(kb.facts)
        second = kb.assert_fact("v48", "registration", "DEF456")
        assert second is first
        assert len(kb.facts) == count

    def test_domain_violation(self, kb):
        with pytest.raises(ModelError, match="registration"):
            kb.assert_fact("black", "registration", "X")

    def test_range_violation(self, kb):
        kb.add_instance(Instance("v48", "vehicle"))
        with pytest.raises(ModelError, match="colour"):
            kb.assert_fact("v48", "colour", "south")

    def test_is_a_extends_types(self, kb):
        kb.add_instance(Instance("v48", "vehicle"))
        kb.assert_fact("v48", IS_A, "moving thing")
        assert "moving thing" in kb.instance_types("v48")
        kb.assert_fact("v48", "direction of travel", "south")

    def test_query_wildcards(self, kb):
        kb.add_instance(Instance("v48", "vehicle"))
        kb.assert_fact("v48", "registration", "DEF456")
        kb.assert_fact("v48", "colour", "black")
        assert len(kb.query(Pattern())) == 2
        assert len(kb.query(Pattern(subject="v48"))) == 2

    def test_query_by_concept_up_to_subtype(self, kb):
        kb.add_instance(Instance("h1", "helicopter"))
        kb.assert_fact("h1", "registration", "HELI1")
        assert kb.query(Pattern(concept="vehicle", property="registration"))

    def test_query_suspect_subject(self, kb_factory):
        kb = kb_factory(
            "there is a person named p1 that is known as 'John Smith' and is a suspect.\n"
            "the person p1 has DEF456 as linked vehicle registration.\n"
        )
        facts = kb.query(Pattern(subject="p1"))
        assert {(f.property.split(":")[1] if ":" in f.property else f.property) for f in facts} == {
            "is a",
            "linked vehicle registration",
        }

    def test_unknown_subject_query(self, kb):
        with pytest.raises(UnknownIdError):
            kb.query(Pattern(subject="ghost"))


class TestStatements:
    def test_assert_statement_creates_instance(self, kb):
        stmt = ce.parse_statement(
            "there is a vehicle named v48 that has DEF456 as registration."
        )
        facts = kernel.assert_statement(kb, stmt, Told("Border Patrol"))
        assert kb.get_instance("v48").concept == "vehicle"
        assert facts[0].provenance == Told("Border Patrol")

    def test_retype_when_id_exists(self, kb):
        kernel.assert_statement(kb, ce.parse_statement("there is a vehicle named v48."))
        kernel.assert_statement(
            kb,
            ce.parse_statement(
                "there is a moving thing named v48 that has the direction south as direction of travel."
            ),
        )
        assert "moving thing" in kb.instance_types("v48")

    def test_because_not_assertable(self, kb):
        with pytest.raises(ModelError):
            kernel.assert_statement(
                kb, ce.parse_statement("because there is a colour named red.")
            )

    def test_description_mirrors_to_instance(self, kb):
        kernel.assert_statement(
            kb,
            ce.parse_statement("there is a person named p1 that has 'Fred' as description."),
        )
        assert kb.get_instance("p1").description == "Fred"

    def test_validate_statement_matches_assert(self, kb):
        good = ce.parse_statement("there is a vehicle named v1 that has X1 as registration.")
        kernel.validate_statement(kb, good)
        bad = ce.parse_statement("the colour black has X as registration.")
        with pytest.raises(ModelError):
            kernel.validate_statement(kb, bad)

    def test_facts_to_statements_introduces_then_refers(self, kb_factory):
        kb = kb_factory(
            "there is a person named p1 that is known as 'John Smith' and is a suspect.\n"
            "the person p1 has DEF456 as linked vehicle registration.\n"
        )
        statements = kernel.facts_to_statements(kb, kb.facts, merge=False)
        assert isinstance(statements[0], ce.NewInstance)
        assert statements[0].clauses[0] == ce.KnownAs("John Smith")
        assert isinstance(statements[1], ce.InstanceFacts)
