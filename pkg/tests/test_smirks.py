import pytest

from mmp_errors import ArityError, SmilesSyntaxError
from mmp_fragmenter import FragmentationConstraints
from mmp_molgraph import canonicalize, parse_smiles
from mmp_smirks import (
    apply_rule,
    apply_rule_products,
    core_preserved,
    parse_rule,
    rgroup_smiles,
    try_parse_rule,
)


def test_parse_rule():
    rule = parse_rule('[*:1]O>>[*:1]N')
    assert rule.lhs_smiles == canonicalize('[*:1]O')
    assert rule.rhs_smiles == canonicalize('[*:1]N')
    assert not rule.is_identity
    assert parse_rule('O[*:1]>>[*:1]O').is_identity


@pytest.mark.parametrize('text', ['', '[*:1]O', '[*:1]O>>[*:1]N>>[*:1]C', '>>[*:1]N', '[*:1]O>>'])
def test_malformed_rules(text):
    with pytest.raises(SmilesSyntaxError):
        parse_rule(text)


def test_rhs_errors_report_offsets_in_the_full_string():
    with pytest.raises(SmilesSyntaxError) as excinfo:
        parse_rule('[*:1]O>>[*:1]C(')
    assert excinfo.value.offset == 14


def test_rule_sides_need_one_attachment():
    with pytest.raises(ArityError):
        parse_rule('CO>>[*:1]N')
    with pytest.raises(ArityError):
        parse_rule('[*:1]O>>[*:1]C[*:1]')


def test_try_parse_rule():
    rule, error = try_parse_rule('[*:1]O>>[*:1]N')
    assert rule is not None and error is None
    rule, error = try_parse_rule('[*:1]O>>[*:1]N(')
    assert rule is None and error.startswith('SmilesSyntaxError')


def test_apply_rule_replaces_the_matching_group():
    products = apply_rule_products(parse_rule('[*:1]O>>[*:1]N'), parse_smiles('c1ccccc1O'))
    assert products == [canonicalize('Nc1ccccc1')]


def test_apply_rule_without_match():
    assert apply_rule(parse_rule('[*:1]Cl>>[*:1]F'), parse_smiles('c1ccccc1O')) == []


def test_apply_rule_respects_bounds():
    rule = parse_rule('[*:1]O>>[*:1]N')
    ethanol = parse_smiles('CCO')
    assert apply_rule(rule, ethanol) == []
    products = apply_rule_products(rule, ethanol, FragmentationConstraints.permissive())
    assert products == [canonicalize('CCN')]


def test_symmetric_sites_give_one_product():
    rule = parse_rule('[*:1]C>>[*:1]CC')
    products = apply_rule_products(rule, parse_smiles('Cc1ccc(C)cc1'))
    assert products == [canonicalize('CCc1ccc(C)cc1')]


def test_distinct_sites_give_distinct_products():
    rule = parse_rule('[*:1]C>>[*:1]F')
    products = apply_rule_products(rule, parse_smiles('Cc1cccc(C)c1CC'))
    assert len(products) == len(set(products)) >= 2


def test_core_preserved_for_products():
    rule = parse_rule('[*:1]OC>>[*:1]N(C)C')
    source = parse_smiles('COc1ccc(C(=O)N)cc1')
    results = apply_rule(rule, source)
    assert results
    for product, site in results:
        assert core_preserved(source, product, rule, site)
    unrelated = parse_smiles('CCCCCCCCCC')
    assert not core_preserved(source, unrelated, rule, results[0][1])


def test_mined_records_round_trip(mined):
    """Every mined rule reproduces its target and keeps the core"""
    assert mined.records
    for record in mined.records:
        rule = parse_rule(record.rule)
        source = parse_smiles(record.source)
        results = apply_rule(rule, source)
        assert record.target in [product.canonical for product, _ in results]
        for product, site in results:
            assert core_preserved(source, product, rule, site)


def test_rgroup_smiles():
    groups = rgroup_smiles(parse_smiles('COc1ccccc1'))
    assert canonicalize('[*:1]OC') in groups
    assert canonicalize('[*:1]C') in groups


def test_identity_rules_give_back_the_source():
    for text in ('COc1ccc(C(=O)N)cc1', 'Cc1cccc(C)c1CC', 'OCCc1ccccc1'):
        mol = parse_smiles(text)
        groups = rgroup_smiles(mol)
        assert groups
        for group in groups:
            products = apply_rule_products(parse_rule(f"{group}>>{group}"), mol)
            assert products == [mol.canonical]


def test_dehydroxylation_of_the_dienone(dienone):
    rule = parse_rule('[*:1]c1ccc(O)c(O)c1>>[*:1]c1ccc(O)cc1')
    mol = parse_smiles(dienone)
    # the catechol is 8 of 21 heavy atoms, above the default ratio bound
    assert apply_rule(rule, mol) == []
    results = apply_rule(rule, mol, FragmentationConstraints.permissive())
    assert [product.canonical for product, _ in results] == [canonicalize('O=C(C=Cc1ccc(O)cc1)C=Cc1ccc(O)cc1')]
    product, site = results[0]
    assert core_preserved(mol, product, rule, site)
