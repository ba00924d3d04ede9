import random

import pytest

from cetalk import fusion, kernel
from cetalk.kernel import Inferred, Instance, Pattern, PropertyDef, Concept, Told

from . import oracles
from .conftest import USE_CASE_PREMISES


class TestRuleParsing:
    def test_bundled_rule(self, rules):
        assert [r.name for r in rules] == ["suspect sighting"]
        assert len(rules[0].conditions) == 3
        assert rules[0].conditions[0].property == kernel.IS_A

    def test_unbound_variable_rejected(self):
        text = (
            "rule broken\nif:\n  the person ?P is a suspect\nthen:\n"
            "  there is a suspect sighting named SS_?V that has the vehicle ?V as target vehicle\n"
        )
        with pytest.raises(fusion.FusionError, match="unbound"):
            fusion.parse_rules(text)

    def test_priority_line(self):
        text = (
            "rule one\npriority 5\nif:\n  the person ?P is a suspect\nthen:\n"
            "  the person ?P has yes as description\n"
        )
        assert fusion.parse_rules(text)[0].priority == 5

    def test_sections_required(self):
        with pytest.raises(fusion.FusionError):
            fusion.parse_rules("rule empty\nif:\n  the person ?P is a suspect\n")


class TestRunRules:
    def test_use_case_inference(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES, Told("analyst database"))
        result = fusion.run_rules(kb, rules)
        triples = {f.triple for f in result.new_facts}
        assert ("SS_v48", "suspect sighting:target vehicle:vehicle", "v48") in triples
        assert ("SS_v48", "suspect sighting:suspect candidate:person", "p1") in triples
        assert kb.get_instance("SS_v48").concept == "suspect sighting"
        prov = result.new_facts[0].provenance
        assert isinstance(prov, Inferred)
        assert prov.rule == "suspect sighting"
        assert len(prov.premises) == 3

    def test_missing_premise_no_inference(self, kb_factory, rules):
        kb = kb_factory(
            "there is a person named p1 that is known as 'John Smith'.\n"
            "the person p1 has DEF456 as linked vehicle registration.\n"
            "there is a vehicle named v48 that has DEF456 as registration.\n"
        )
        assert fusion.run_rules(kb, rules).new_facts == []

    def test_fixpoint_idempotent(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES)
        fusion.run_rules(kb, rules)
        count = len(kb.facts)
        second = fusion.run_rules(kb, rules)
        assert second.new_facts == []
        assert len(kb.facts) == count

    def test_iteration_cap(self, kb_factory):
        # a self-feeding rule grows forever; the cap must trip
        text = (
            "rule runaway\nif:\n  the person ?P has ?D as description\nthen:\n"
            "  there is a person named x_?P that has ?D as description\n"
        )
        kb = kb_factory("there is a person named p1 that has 'seed' as description.")
        with pytest.raises(fusion.FusionError, match="fixpoint"):
            fusion.run_rules(kb, fusion.parse_rules(text), max_iterations=5)

    def test_order_permutation_same_fixpoint(self, kb_factory):
        text = (
            "rule a\nif:\n  the vehicle ?V has ?R as registration\nthen:\n"
            "  the vehicle ?V has 'seen' as description\n"
            "rule b\nif:\n  the vehicle ?V has ?D as description\nthen:\n"
            "  there is a suspect sighting named W_?V that has the vehicle ?V as target vehicle\n"
        )
        rules = fusion.parse_rules(text)
        results = []
        for ordering in (rules, rules[::-1]):
            kb = kb_factory("there is a vehicle named v1 that has AAA as registration.")
            fusion.run_rules(kb, ordering)
            results.append(kb.snapshot_triples())
        assert results[0] == results[1]


class TestRationale:
    def test_inferred_matches_listing(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES, Told("analyst database"))
        fusion.run_rules(kb, rules)
        rationale = fusion.rationale(kb, "SS_v48")
        assert rationale.text == (
            "because there is a person named p1 that is known as 'John Smith' "
            "and is a suspect and the person p1 has DEF456 as linked vehicle "
            "registration and there is a vehicle named v48 that has DEF456 as "
            "registration."
        )
        assert rationale.rule == "suspect sighting"
        for premise in rationale.premises:
            assert kb.get_fact(premise)

    def test_told_cites_source_and_time(self, kb_factory):
        kb = kb_factory(
            "there is a vehicle named v48 that has DEF456 as registration.",
            Told("Border Patrol", "c1", "2014-06-05T10:00:00Z"),
        )
        fact = kb.query(Pattern(property="registration"))[0]
        rationale = fusion.rationale(kb, fact.id)
        assert rationale.text == (
            "because there is a vehicle named v48 that has DEF456 as "
            "registration and was reported by 'Border Patrol' at "
            "'2014-06-05T10:00:00Z'."
        )

    def test_unknown_reference(self, kb):
        with pytest.raises(kernel.UnknownIdError):
            fusion.rationale(kb, "nothing")

    def test_every_inferred_fact_has_rationale(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES)
        fusion.run_rules(kb, rules)
        for fact in kb.facts:
            if isinstance(fact.provenance, Inferred):
                rationale = fusion.rationale(kb, fact.id)
                assert rationale.premises
                for pid in rationale.premises:
                    assert kb.get_fact(pid)


class TestSubscriptions:
    def test_delivery_after_run(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES)
        manager = fusion.SubscriptionManager()
        sub, initial = manager.subscribe(
            kb, Pattern(concept="suspect sighting"), "analyst"
        )
        assert initial == []
        result = fusion.run_rules(kb, rules)
        deliveries = manager.deliveries(kb, result.new_facts)
        assert len(deliveries) == 1
        assert deliveries[0][0].subscriber == "analyst"
        assert {f.subject for f in deliveries[0][1]} == {"SS_v48"}

    def test_existing_match_delivered_immediately(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES)
        fusion.run_rules(kb, rules)
        manager = fusion.SubscriptionManager()
        _, initial = manager.subscribe(kb, Pattern(concept="suspect sighting"), "late")
        assert {f.subject for f in initial} == {"SS_v48"}

    def test_unsubscribe_stops_delivery(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES)
        manager = fusion.SubscriptionManager()
        sub, _ = manager.subscribe(kb, Pattern(concept="suspect sighting"), "analyst")
        manager.unsubscribe(sub.id)
        result = fusion.run_rules(kb, rules)
        assert manager.deliveries(kb, result.new_facts) == []

    def test_delivery_order_is_creation_order(self, kb_factory, rules):
        kb = kb_factory(USE_CASE_PREMISES)
        manager = fusion.SubscriptionManager()
        manager.subscribe(kb, Pattern(concept="suspect sighting"), "first")
        manager.subscribe(kb, Pattern(property="target vehicle"), "second")
        result = fusion.run_rules(kb, rules)
        subscribers = [s.subscriber for s, _ in manager.deliveries(kb, result.new_facts)]
        assert subscribers == ["first", "second"]


# ----------------------------------------------------------------------
# randomized closure oracle


def _random_setup(rng: random.Random):
    concepts = [f"c{i}" for i in range(rng.randint(3, 5))]
    parents = {}
    for i, name in enumerate(concepts):
        if i and rng.random() < 0.5:
            parents[name] = (concepts[rng.randrange(i)],)
        else:
            parents[name] = ()
    prop_names = [f"prop{i}" for i in range(rng.randint(2, 4))]
    prop_domains = {p: rng.choice(concepts) for p in prop_names}
    instances = {f"i{i}": rng.choice(concepts) for i in range(rng.randint(3, 6))}
    values = ["red", "blue", "tall", "small"]
    told = set()
    for _ in range(rng.randint(2, 20)):
        prop = rng.choice(prop_names)
        domain = prop_domains[prop]
        candidates = [i for i, c in instances.items() if domain in _closure(parents, c)]
        if not candidates:
            continue
        told.add((rng.choice(candidates), prop, rng.choice(values)))
    rules = []
    for r in range(rng.randint(1, 5)):
        # stratified: conditions only read properties below the one the
        # rule writes, so derivations are well-founded and closures finite
        target_index = rng.randrange(1, len(prop_names))
        n_conditions = rng.randint(1, 2)
        conditions = []
        for ci in range(n_conditions):
            prop = prop_names[rng.randrange(0, target_index)]
            subj = f"?S{ci}" if rng.random() < 0.8 else rng.choice(list(instances))
            obj = f"?V{ci}" if rng.random() < 0.7 else rng.choice(values)
            concept = prop_domains[prop] if rng.random() < 0.5 else None
            conditions.append((subj, concept, prop, obj))
        target_prop = prop_names[target_index]
        target_concept = prop_domains[target_prop]
        subject_vars = [c[0] for c in conditions if c[0].startswith("?")]
        value_vars = [c[3] for c in conditions if c[3].startswith("?")]
        id_template = f"R{r}_{subject_vars[0]}" if subject_vars else f"R{r}_fixed"
        value = rng.choice(value_vars) if value_vars and rng.random() < 0.7 else "mark"
        rules.append(
            oracles.SimpleRule(
                name=f"rule{r}",
                conditions=tuple(conditions),
                productions=((id_template, target_concept, ((target_prop, value),)),),
            )
        )
    return parents, instances, told, rules, prop_domains


def _closure(parents, concept):
    out, stack = set(), [concept]
    while stack:
        c = stack.pop()
        if c not in out:
            out.add(c)
            stack.extend(parents.get(c, ()))
    return out


def _build_kb(parents, instances, told, prop_domains):
    kb = kernel.KnowledgeBase()
    kb.add_concepts([Concept(c, p) for c, p in parents.items()])
    for prop, domain in prop_domains.items():
        kb.add_property(PropertyDef(domain, prop))
    for iid, concept in instances.items():
        kb.add_instance(Instance(iid, concept))
    for subject, prop, value in sorted(told):
        kb.assert_fact(subject, prop, value)
    return kb


def _engine_rules(rules):
    from cetalk import ce

    out = []
    for rule in rules:
        conditions = tuple(
            fusion.FactPattern(subj, concept, prop, obj)
            for subj, concept, prop, obj in rule.conditions
        )
        productions = tuple(
            ce.NewInstance(
                concept,
                id_template,
                tuple(ce.PropertyClause(p, v) for p, v in clauses),
            )
            for id_template, concept, clauses in rule.productions
        )
        out.append(fusion.Rule(rule.name, conditions, productions))
    return out


def _bare_triples(kb):
    out = set()
    for fact in kb.facts:
        prop = fact.property
        if ":" in prop:
            prop = prop.split(":")[1]
        out.add((fact.subject, prop, fact.object))
    return out


def test_fixpoint_matches_bruteforce_oracle():
    failures = []
    for seed in range(60):
        rng = random.Random(seed)
        parents, instances, told, rules, prop_domains = _random_setup(rng)
        kb = _build_kb(parents, instances, told, prop_domains)
        fusion.run_rules(kb, _engine_rules(rules), max_iterations=200)
        got = _bare_triples(kb)
        expected = oracles.naive_closure(
            parents, dict(instances), set(told), rules
        )
        if got != expected:
            failures.append((seed, got ^ expected))
    assert not failures, failures[:3]


def test_rule_order_permutation_oracle():
    for seed in (3, 11, 29):
        rng = random.Random(seed)
        parents, instances, told, rules, prop_domains = _random_setup(rng)
        engine_rules = _engine_rules(rules)
        baseline = None
        for _ in range(3):
            rng.shuffle(engine_rules)
            kb = _build_kb(parents, instances, told, prop_domains)
            fusion.run_rules(kb, engine_rules, max_iterations=200)
            triples = _bare_triples(kb)
            if baseline is None:
                baseline = triples
            assert triples == baseline
