import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samasa.bpe import train_subword_vocab
from samasa.data import (
    ContextInstance,
    DatasetError,
    LabelVocab,
    dataset_stats,
    encode_instance,
    load_jsonl_dataset,
    merge_conllu_pseudolabels,
    write_jsonl_dataset,
)

EXAMPLE = ContextInstance(tokens=["aham", "pīta-ambaram", "namāmi"], compound_index=1, label="B")


def make_vocab(*instances):
    corpus = [t for inst in instances for t in inst.tokens]
    chars = {c for t in corpus for c in t}
    return train_subword_vocab(corpus, vocab_size=len(chars) + 10)


# -- validation ---------------------------------------------------------------


def test_compound_must_have_two_components():
    with pytest.raises(DatasetError, match="two components"):
        ContextInstance(tokens=["rāmaḥ"], compound_index=0).validate()
    with pytest.raises(DatasetError, match="two components"):
        ContextInstance(tokens=["a-b-c"], compound_index=0).validate()


def test_compound_index_bounds():
    with pytest.raises(DatasetError, match="compound_index"):
        ContextInstance(tokens=["x-y"], compound_index=1).validate()


def test_per_token_lists_checked():
    with pytest.raises(DatasetError, match="morph_tags"):
        ContextInstance(tokens=["x-y", "b"], compound_index=0, morph_tags=["N"]).validate()


def test_self_loop_heads_rejected():
    with pytest.raises(DatasetError, match="itself"):
        ContextInstance(tokens=["x-y", "b"], compound_index=0, dep_heads=[1, 0]).validate()


# -- encode_instance -----------------------------------------------------------


def test_encode_instance_compound_only_context():
    inst = ContextInstance(tokens=["pīta-ambaram"], compound_index=0)
    vocab = make_vocab(inst)
    ids, spans = encode_instance(inst, vocab)
    assert len(spans) == 2
    (s0, e0), (s1, e1) = spans
    assert ids[s0:e0] == ids[s1:e1]


def test_encode_instance_appends_compound():
    vocab = make_vocab(EXAMPLE)
    ids, spans = encode_instance(EXAMPLE, vocab)
    assert len(spans) == 4
    first, last = spans[1], spans[3]
    assert ids[first[0]:first[1]] == ids[last[0]:last[1]]
    # spans partition the sequence
    assert spans[0][0] == 0 and spans[-1][1] == len(ids)
    for (_, e), (s, _) in zip(spans, spans[1:]):
        assert e == s


@settings(max_examples=40, deadline=None)
@given(st.lists(st.text(alphabet="abcdefā", min_size=1, max_size=6), min_size=1, max_size=6),
       st.data())
def test_encode_instance_round_trips_tokens(tokens, data):
    idx = data.draw(st.integers(min_value=0, max_value=len(tokens) - 1))
    tokens = list(tokens)
    tokens[idx] = "ab-cd"
    inst = ContextInstance(tokens=tokens, compound_index=idx).validate()
    vocab = make_vocab(inst)
    ids, spans = encode_instance(inst, vocab)
    rebuilt = [vocab.decode(ids[s:e]) for s, e in spans]
    assert rebuilt == tokens + [tokens[idx]]


# -- JSONL ---------------------------------------------------------------------


def test_empty_file_is_empty_dataset(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("", encoding="utf-8")
    assert load_jsonl_dataset(p) == []


def random_instances(k):
    out = []
    for i in range(k):
        n = 1 + i % 5
        tokens = [f"tok{j}" for j in range(n)]
        idx = i % n
        tokens[idx] = f"left{i}-right{i}"
        inst = ContextInstance(
            tokens=tokens,
            compound_index=idx,
            label="ABDT"[i % 4],
            language=("sa", "en", "mr")[i % 3],
            morph_tags=[f"T{j}" for j in range(n)] if i % 2 else None,
            dep_heads=[0] * n if i % 3 == 0 else None,
            dep_rels=["root"] * n if i % 3 == 0 else None,
            uid=f"inst-{i}",
        )
        out.append(inst.validate())
    return out


def test_jsonl_round_trip_identity(tmp_path):
    instances = random_instances(50)
    p = tmp_path / "data.jsonl"
    write_jsonl_dataset(p, instances)
    assert load_jsonl_dataset(p) == instances


def test_schema_violation_reports_line_number(tmp_path):
    p = tmp_path / "bad.jsonl"
    good = json.dumps(EXAMPLE.to_json(), ensure_ascii=False)
    p.write_text(good + "\n" + '{"tokens": ["a-b"]}' + "\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="line 2"):
        load_jsonl_dataset(p)


def test_invariant_violation_names_field(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"tokens": ["ab"], "compound_index": 0}\n', encoding="utf-8")
    with pytest.raises(DatasetError, match="tokens"):
        load_jsonl_dataset(p)


def test_diacritics_survive_round_trip(tmp_path):
    p = tmp_path / "iast.jsonl"
    write_jsonl_dataset(p, [EXAMPLE])
    raw = p.read_text(encoding="utf-8")
    assert "pīta-ambaram" in raw
    assert load_jsonl_dataset(p)[0].tokens == EXAMPLE.tokens


# -- CoNLL-U -------------------------------------------------------------------

CONLLU_3TOK = """\
# sent_id = 1
1\taham\tasmad\tPRON\t_\tCase=Nom|Number=Sing\t3\tnsubj\t_\t_
2\tpīta-ambaram\tpīta-ambara\tNOUN\t_\tCase=Acc|Gender=Masc\t3\tobj\t_\t_
3\tnamāmi\tnam\tVERB\t_\tNumber=Sing\t0\troot\t_\t_
"""


def test_merge_fills_fields_from_hand_parse(tmp_path):
    p = tmp_path / "x.conllu"
    p.write_text(CONLLU_3TOK, encoding="utf-8")
    merged = merge_conllu_pseudolabels([EXAMPLE], p)
    inst = merged[0]
    assert inst.morph_tags == [
        "PRON|Case=Nom|Number=Sing",
        "NOUN|Case=Acc|Gender=Masc",
        "VERB|Number=Sing",
    ]
    assert inst.dep_heads == [3, 3, 0]
    assert inst.dep_rels == ["nsubj", "obj", "root"]
    assert inst.case_tags == ["Nom", "Acc", "_"]
    assert inst.lemmas == ["asmad", "pīta-ambara", "nam"]
    # original untouched
    assert EXAMPLE.morph_tags is None


def test_merge_all_roots(tmp_path):
    rows = "\n".join(
        f"{i+1}\tt{i}\t_\tX\t_\t_\t0\troot\t_\t_" for i in range(2)
    )
    p = tmp_path / "r.conllu"
    p.write_text(rows + "\n", encoding="utf-8")
    inst = ContextInstance(tokens=["a-b", "c"], compound_index=0).validate()
    merged = merge_conllu_pseudolabels([inst], p)
    assert merged[0].dep_heads == [0, 0]


def test_merge_preserves_existing_gold_fields(tmp_path):
    p = tmp_path / "x.conllu"
    p.write_text(CONLLU_3TOK, encoding="utf-8")
    gold = ContextInstance(
        tokens=["aham", "pīta-ambaram", "namāmi"], compound_index=1,
        morph_tags=["G1", "G2", "G3"]).validate()
    merged = merge_conllu_pseudolabels([gold], p)
    assert merged[0].morph_tags == ["G1", "G2", "G3"]
    assert merged[0].dep_heads == [3, 3, 0]


def test_misaligned_conllu_rejected_with_index(tmp_path):
    p = tmp_path / "x.conllu"
    p.write_text("1\tonly\t_\tX\t_\t_\t0\troot\t_\t_\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="sentence 0"):
        merge_conllu_pseudolabels([EXAMPLE], p)


def test_sentence_count_mismatch_rejected(tmp_path):
    p = tmp_path / "x.conllu"
    p.write_text(CONLLU_3TOK + "\n" + CONLLU_3TOK, encoding="utf-8")
    with pytest.raises(DatasetError, match="2 sentences"):
        merge_conllu_pseudolabels([EXAMPLE], p)


# -- stats / label vocab ---------------------------------------------------------


def test_stats_empty():
    stats = dataset_stats({"train": []})
    assert stats["splits"]["train"]["instances"] == 0
    assert stats["unique_compounds"] == 0


def test_stats_counts_and_unique_compounds():
    instances = random_instances(24)
    stats = dataset_stats({"train": instances[:16], "dev": instances[16:]})
    assert stats["splits"]["train"]["instances"] == 16
    assert stats["splits"]["dev"]["instances"] == 8
    assert stats["unique_compounds"] == len({i.compound for i in instances})
    assert stats["types"] == ["A", "B", "D", "T"]


def test_label_vocab_bijective():
    vocab = LabelVocab.from_values(["T", "B", "A", "D", "B"])
    assert vocab.names == ["A", "B", "D", "T"]
    for i, name in enumerate(vocab.names):
        assert vocab.id(name) == i
        assert vocab.name(i) == name
    with pytest.raises(DatasetError, match="unknown label"):
        vocab.id("Z")
