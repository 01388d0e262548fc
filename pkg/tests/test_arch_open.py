import json

import pytest

from pathrag.arch_open import (CaptionRecord, generate_dataset, load_captions,
                               parse_qa_response, qa_to_sample_dict, split_dataset)
from pathrag.errors import (DuplicateId, InvalidQuestionStem, MissingField,
                            UnpairedMarker, WrongCount)
from pathrag.llm import Gateway, MockBackend, ResponseCache, Role

REPLY = """Question: What type of cells form the fascicles?
Answer: Spindle cells with eosinophilic cytoplasm.

Question: What is the arrangement of the tumor cells?
Answer: They are arranged in interlacing fascicles.

Question: What does the cytoplasm look like?
Answer: Eosinophilic.

Question: Where are the nuclei located?
Answer: Centrally, within elongated cells.

Question: What is the shape of the nuclei?
Answer: Cigar-shaped."""


def pairs_text(n, stem="What"):
    return "\n".join(f"Question: {stem} is {i}?\nAnswer: thing {i}." for i in range(n))


def captions(n):
    return [CaptionRecord(f"cap{i:02d}", f"img/{i}.png", f"Caption number {i} of tissue.")
            for i in range(n)]


def test_parse_well_formed_reply():
    pairs = parse_qa_response(REPLY, "c1")
    assert len(pairs) == 5
    assert pairs[0].question == "What type of cells form the fascicles?"
    assert pairs[0].answer == "Spindle cells with eosinophilic cytoplasm."
    assert pairs[3].question.startswith("Where") and pairs[4].ordinal == 5
    assert {p.caption_id for p in pairs} == {"c1"}


def test_parse_is_case_insensitive_on_markers():
    text = pairs_text(5).replace("Question:", "QUESTION :").replace("Answer:", "answer:")
    assert len(parse_qa_response(text)) == 5


def test_parse_wrong_count():
    with pytest.raises(WrongCount) as info:
        parse_qa_response(pairs_text(4))
    assert info.value.found == 4
    with pytest.raises(WrongCount):
        parse_qa_response(pairs_text(6))
    with pytest.raises(WrongCount):
        parse_qa_response("no markers at all")


def test_parse_rejects_other_stems():
    text = pairs_text(4) + "\nQuestion: How is it stained?\nAnswer: With eosin."
    with pytest.raises(InvalidQuestionStem) as info:
        parse_qa_response(text)
    assert info.value.ordinal == 5


@pytest.mark.parametrize("text", [
    "Answer: first\nQuestion: What?",
    "Question: What?\nQuestion: Where?\nAnswer: x",
    pairs_text(4) + "\nQuestion: What dangling?",
    "Question: What?\nAnswer:   \n" + pairs_text(4),
])
def test_parse_unpaired(text):
    with pytest.raises(UnpairedMarker):
        parse_qa_response(text)


def test_generate_ten_captions_yields_fifty_pairs(mock_gateway):
    pairs, failures = generate_dataset(captions(10), mock_gateway)
    assert len(pairs) == 50 and failures == []
    assert [p.caption_id for p in pairs] == [f"cap{i:02d}" for i in range(10) for _ in range(5)]
    assert mock_gateway.backend_calls[Role.TEXT_REASONER] == 10


def test_generate_is_order_stable_with_workers(tmp_path):
    seq, _ = generate_dataset(captions(10), Gateway(MockBackend()))
    par, _ = generate_dataset(captions(10), Gateway(MockBackend()), workers=4)
    assert seq == par


def test_persistent_bad_reply_fails_after_retries():
    backend = MockBackend(lambda r: pairs_text(4))
    pairs, failures = generate_dataset(captions(2), Gateway(backend), max_retries=2)
    assert pairs == [] and len(failures) == 2
    assert failures[0].attempts == 3 and "WrongCount" in failures[0].error
    assert backend.calls == 6


def test_retry_recovers_and_skips_cache(tmp_path):
    replies = iter([pairs_text(4), pairs_text(5)])
    backend = MockBackend(lambda r: next(replies))
    cache = ResponseCache(tmp_path)
    pairs, failures = generate_dataset(captions(1), Gateway(backend, cache=cache))
    assert len(pairs) == 5 and failures == [] and backend.calls == 2


def test_duplicate_ids_rejected_before_any_call():
    backend = MockBackend()
    recs = captions(3) + [captions(1)[0]]
    with pytest.raises(DuplicateId):
        generate_dataset(recs, Gateway(backend))
    assert backend.calls == 0


def test_split_is_caption_atomic_and_deterministic(mock_gateway):
    pairs, _ = generate_dataset(captions(10), mock_gateway)
    train, test = split_dataset(pairs, 0.8, seed=3)
    train_caps = {p.caption_id for p in train}
    test_caps = {p.caption_id for p in test}
    assert (len(train_caps), len(test_caps)) == (8, 2)
    assert (len(train), len(test)) == (40, 10)
    assert not train_caps & test_caps
    assert sorted(train + test, key=lambda p: (p.caption_id, p.ordinal)) == pairs
    assert split_dataset(pairs, 0.8, seed=3) == (train, test)
    flipped = split_dataset(list(reversed(pairs)), 0.8, seed=3)[1]
    assert {p.caption_id for p in flipped} == test_caps
    others = {frozenset(p.caption_id for p in split_dataset(pairs, 0.8, seed=s)[1])
              for s in range(10)}
    assert len(others) > 1


def test_sample_dict_and_caption_loading(tmp_path):
    p = tmp_path / "caps.jsonl"
    p.write_text(json.dumps({"id": "c", "image": "i.png", "caption": "x", "origin": "Books"})
                 + "\n", encoding="utf-8")
    rec = load_captions(p)[0]
    pair = parse_qa_response(REPLY, "c")[1]
    d = qa_to_sample_dict(pair, rec)
    assert d["id"] == "c-q2" and d["origin"] == "Books" and d["answer"] == pair.answer
    p.write_text(json.dumps({"id": "c", "image": "i.png"}) + "\n", encoding="utf-8")
    with pytest.raises(MissingField):
        load_captions(p)
