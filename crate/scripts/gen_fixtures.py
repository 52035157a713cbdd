#!/usr/bin/env python3
"""Regenerate the bundled test fixtures under crates/core/tests/fixtures.

The mini-corpus is synthetic and seeded; the normalization fixture's expected
values come from Python's unicodedata, independent of the Rust code.
"""
import json
import os
import random
import unicodedata

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures")
rng = random.Random(20240101)


def write_lines(name, lines):
    with open(os.path.join(OUT, name), "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def jl(obj):
    return json.dumps(obj, ensure_ascii=False)


# ---------------------------------------------------------------- NER (EN)
EN_ENT = {
    "PER": ["John Smith", "Mary", "Ada Lovelace", "Bob", "Li Wei"],
    "LOC": ["Paris", "New York", "Berlin", "Tokyo", "Lake Tahoe"],
    "ORG": ["Acme Corp", "United Nations", "Google", "Red Cross"],
    "DATE": ["Monday", "last year", "2019"],
}
EN_TEMPLATES = [
    ["{PER}", "visited", "{LOC}", "on", "{DATE}", "."],
    ["{PER}", "works", "for", "{ORG}", "."],
    ["{ORG}", "opened", "an", "office", "in", "{LOC}", "."],
    ["{PER}", "met", "{PER}", "in", "{LOC}", "."],
    ["It", "rained", "all", "day", "."],
]
EN_UNUSED = ["MISC", "EVENT"]


def bio_sentence(template, ents, split_chars):
    rows = []
    for slot in template:
        if slot.startswith("{"):
            label = slot[1:-1]
            mention = rng.choice(ents[label])
            toks = list(mention) if split_chars else mention.split()
            for i, t in enumerate(toks):
                rows.append(f"{t}\t{'B' if i == 0 else 'I'}-{label}")
        else:
            toks = list(slot) if split_chars else [slot]
            rows.extend(f"{t}\tO" for t in toks)
    return rows


def bio_file(name, templates, ents, split_chars, n=60):
    lines = []
    for i in range(n):
        lines.extend(bio_sentence(templates[i % len(templates)], ents, split_chars))
        lines.append("")
    write_lines(name, lines)


bio_file("ner_en.bio", EN_TEMPLATES, EN_ENT, split_chars=False)

# ---------------------------------------------------------------- NER (ZH)
ZH_ENT = {
    "人物": ["张三", "李四", "王小明", "赵六"],
    "地点": ["北京", "上海", "杭州西湖", "深圳"],
    "机构": ["百度", "清华大学", "人民银行"],
    "时间": ["昨天", "去年", "周一"],
}
ZH_TEMPLATES = [
    ["{人物}", "在", "{地点}", "工作"],
    ["{人物}", "于", "{时间}", "加入", "{机构}"],
    ["{机构}", "位于", "{地点}"],
    ["今天天气很好"],
    ["{人物}", "和", "{人物}", "去了", "{地点}"],
]
bio_file("ner_zh.bio", ZH_TEMPLATES, ZH_ENT, split_chars=True)

# ---------------------------------------------------------------- RE
def re_file(name, rels, ents, fmt, n=60):
    lines = []
    for i in range(n):
        if i % 10 == 9:
            lines.append(jl({"id": str(i), "text": fmt["empty"], "spo_list": []}))
            continue
        spos, parts = [], []
        for _ in range(1 + i % 2):
            pred, (hs, ts) = rng.choice(list(rels.items()))
            h, t = rng.choice(ents[hs]), rng.choice(ents[ts])
            spos.append({"subject": h, "predicate": pred, "object": t})
            parts.append(fmt["sent"].format(h=h, p=pred, t=t))
        if i % 7 == 0:
            spos.append(dict(spos[0]))
        lines.append(jl({"id": str(i), "text": fmt["join"].join(parts), "spo_list": spos}))
    write_lines(name, lines)


re_file(
    "re_en.jsonl",
    {"founder": ("PER", "ORG"), "located_in": ("ORG", "LOC"), "works_for": ("PER", "ORG"), "born_in": ("PER", "LOC")},
    EN_ENT,
    {"sent": "{h} is linked to {t} ({p}).", "join": " ", "empty": "Nothing happened here."},
)
re_file(
    "re_zh.jsonl",
    {"创始人": ("机构", "人物"), "位于": ("机构", "地点"), "任职于": ("人物", "机构"), "出生地": ("人物", "地点")},
    ZH_ENT,
    {"sent": "{h}与{t}有关（{p}）。", "join": "", "empty": "这里什么也没发生。"},
)

# ---------------------------------------------------------------- EE
def ee_file(name, events, ents, empty_text, n=60):
    lines = []
    for i in range(n):
        if i % 10 == 9:
            lines.append(jl({"id": str(i), "text": empty_text, "event_list": []}))
            continue
        evs, words = [], []
        for k in range(1 + i % 2):
            etype, (triggers, roles) = rng.choice(list(events.items()))
            trig = rng.choice(triggers)
            args = []
            if i % 5 != 3:
                for role, slot in roles:
                    val = rng.choice(ents[slot])
                    args.append({"role": role, "argument": val})
                    words.append(val)
                if i % 4 == 0:
                    role, slot = roles[0]
                    extra = rng.choice(ents[slot])
                    args.append({"role": role, "argument": extra})
                    words.append(extra)
            words.append(trig)
            evs.append({"event_type": etype, "trigger": trig, "arguments": args})
        lines.append(jl({"id": str(i), "text": " ".join(words), "event_list": evs}))
    write_lines(name, lines)


ee_file(
    "ee_en.jsonl",
    {
        "Attack": (["attacked", "hit", "bombed"], [("Attacker", "PER"), ("Place", "LOC")]),
        "Meet": (["met", "talks"], [("Entity", "ORG"), ("Place", "LOC")]),
        "Transport": (["traveled", "moved"], [("Artifact", "PER"), ("Destination", "LOC")]),
    },
    EN_ENT,
    "Quiet day.",
)
ee_file(
    "ee_zh.jsonl",
    {
        "质押": (["质押", "出质"], [("质押方", "机构"), ("质权方", "机构")]),
        "中标": (["中标", "中选"], [("中标公司", "机构"), ("中标地点", "地点")]),
        "裁员": (["裁员", "裁撤"], [("裁员方", "机构")]),
    },
    ZH_ENT,
    "今日无事。",
)

# ---------------------------------------------------------------- normalization oracle
NORM_INPUTS = [
    "  Apple  Inc. ", "\u5f20\u4e09", "New\u00a0York", "Cafe\u0301", "caf\u00e9", "e\u0301\u0301",
    "\u1100\u1161\u11a8", "A\u030a", "\u212b", "\uf900", "\tTab\tSeparated\t", "line\nbreak",
    "\u3000\u5168\u89d2\u3000\u7a7a\u683c\u3000", "a\u2002b", "x\u202fy", "\u00a0\u00a0", "", "\u2028 ", "ABC def",
    "Stra\u00dfe", "\u03a3\u038a\u03a3\u03a5\u03a6\u039f\u03a3", "A\u0308", "\u00c4", "o\u0323\u0302", "s\u0323\u0307", "s\u0307\u0323",
    "Zo\u00eb  Salda\u00f1a", "\u5317\u4eac   \u4e0a\u6d77", "a\r\nb", "\u205fsep\u205f", "mix\u1680ed", "\u0085next",
    "\u97d3\u00a0\u56fd", "\u304b\u3099", "\u30ab\u3099", "\uff8a\uff9f", "\uff76\uff9e", "\u2460", "\ufb01", "x\u000by",
    "end\u2009", "\u200astart", "multi \t\n space", "UPPER lower", "\u0301leading", "\U00020000\u5b57", "emoji \U0001F600  face",
    "\u0065\u0301\u0302", "n\u0303 \u00f1", "  \u591a  \u4e2a  \u7a7a\u683c  ",
]
assert len(NORM_INPUTS) == 50
norm = [
    {"input": s, "expected": " ".join(unicodedata.normalize("NFC", s).split())}
    for s in NORM_INPUTS
]
for s in NORM_INPUTS:
    assert not any(0x1C <= ord(c) <= 0x1F for c in s)
with open(os.path.join(OUT, "normalize_cases.json"), "w", encoding="utf-8", newline="\n") as f:
    json.dump(norm, f, ensure_ascii=True, indent=1)
    f.write("\n")

# ---------------------------------------------------------------- malformed outputs
def E(t, m):
    return {"kind": "entity", "entity_type": t, "mention": m}


def R(r, h, t):
    return {"kind": "relation", "relation": r, "head": h, "tail": t}


def T(e, t):
    return {"kind": "trigger", "event_type": e, "trigger": t}


def A(e, r, v):
    return {"kind": "argument", "event_type": e, "role": r, "value": v}


NER_L = ["PER", "LOC", "ORG"]
RE_L = ["founder", "located_in"]
EE_L = ["Attack", "质押"]
cases = []


def case(name, task, allowed, raw, expected):
    cases.append({"name": name, "task": task, "allowed": allowed, "raw": raw, "expected": expected})


case("ner_canonical", "NER", NER_L, '{"PER": ["张三"], "LOC": ["北京"]}', [E("PER", "张三"), E("LOC", "北京")])
case("ner_fenced_json", "NER", NER_L, 'Sure! ```json\n{"PER": ["张三"]}\n``` Hope this helps.', [E("PER", "张三")])
case("ner_fenced_plain", "NER", NER_L, '```\n{"ORG": ["Google"]}\n```', [E("ORG", "Google")])
case("ner_preamble", "NER", NER_L, 'Here is the result: {"PER": ["Mary"]}', [E("PER", "Mary")])
case("ner_trailing_prose", "NER", NER_L, '{"LOC": ["Paris"]}\nLet me know if you need anything else.', [E("LOC", "Paris")])
case("ner_string_for_list", "NER", NER_L, '{"PER": "张三", "LOC": ["北京"]}', [E("PER", "张三"), E("LOC", "北京")])
case("ner_hallucinated", "NER", NER_L, '{"PER": ["Bob"], "ALIEN": ["x"]}', [E("PER", "Bob")])
case("ner_wrap_and_filter", "NER", NER_L, '{"PER": "张三", "ALIEN": ["x"]}', [E("PER", "张三")])
case("ner_unterminated_fence", "NER", NER_L, 'Answer:\n```json\n{"ORG": ["百度"]}', [E("ORG", "百度")])
case("ner_pretty_printed", "NER", NER_L, '{\n  "PER": [\n    "Ada Lovelace"\n  ]\n}\n', [E("PER", "Ada Lovelace")])
case("ner_whitespace_mention", "NER", NER_L, '{"LOC": ["  New York "]}', [E("LOC", "New York")])
case("ner_empty_object", "NER", NER_L, "{}", [])
case("ner_array_of_objects", "NER", NER_L, '[{"type": "PER", "mention": "John"}, {"entity_type": "LOC", "entity": "Rome"}]', [E("PER", "John"), E("LOC", "Rome")])
case("ner_think_block", "NER", NER_L, '<think>the text mentions a city</think>{"LOC": ["上海"]}', [E("LOC", "上海")])
case("ner_bracket_preamble", "NER", NER_L, '[Answer] The entities are {"ORG": ["Red Cross"]}.', [E("ORG", "Red Cross")])
case("ner_null_value", "NER", NER_L, '{"PER": null, "LOC": ["北京"]}', [E("LOC", "北京")])
case("ner_duplicate_mentions", "NER", NER_L, '{"PER": ["李四", "李四"]}', [E("PER", "李四")])
case("ner_zh_preamble_fenced", "NER", NER_L, '答案如下：\n```json\n{"PER": ["王小明"], "ORG": ["清华大学"]}\n```', [E("PER", "王小明"), E("ORG", "清华大学")])
case("ner_two_fences", "NER", NER_L, '```json\n{"PER": ["A"]}\n```\nor maybe\n```json\n{"PER": ["B"]}\n```', [E("PER", "A")])
case("ner_escaped_quotes", "NER", NER_L, '```json\n{"ORG": ["\\"Acme\\" Corp"]}\n```', [E("ORG", '"Acme" Corp')])
case("re_canonical", "RE", RE_L, '[{"relation": "founder", "head": "Google", "tail": "Larry"}]', [R("founder", "Google", "Larry")])
case("re_fenced", "RE", RE_L, 'Relations:\n```json\n[{"relation": "located_in", "head": "百度", "tail": "北京"}]\n```', [R("located_in", "百度", "北京")])
case("re_single_object", "RE", RE_L, '{"relation": "founder", "head": "Acme", "tail": "Bob"}', [R("founder", "Acme", "Bob")])
case("re_preamble_list", "RE", RE_L, 'The triples are: [{"relation": "founder", "head": "A", "tail": "B"}] as requested.', [R("founder", "A", "B")])
case("re_spo_keys", "RE", RE_L, '[{"subject": "Acme", "predicate": "located_in", "object": "Paris"}]', [R("located_in", "Acme", "Paris")])
case("re_hallucinated", "RE", RE_L, '[{"relation": "founder", "head": "A", "tail": "B"}, {"relation": "married_to", "head": "C", "tail": "D"}]', [R("founder", "A", "B")])
case("re_trailing_brackets", "RE", RE_L, '[{"relation": "located_in", "head": "UN", "tail": "New York"}] [1] see source', [R("located_in", "UN", "New York")])
case("re_missing_tail", "RE", RE_L, '[{"relation": "founder", "head": "A"}, {"relation": "founder", "head": "C", "tail": "D"}]', [R("founder", "C", "D")])
case("ee_canonical", "EE-joint", EE_L, '[{"event_type": "Attack", "trigger": "hit", "arguments": {"Attacker": ["Bob"], "Place": ["Paris"]}}]', [T("Attack", "hit"), A("Attack", "Attacker", "Bob"), A("Attack", "Place", "Paris")])
case("ee_fenced", "EE-joint", EE_L, '```json\n[{"event_type": "质押", "trigger": "质押", "arguments": {"质押方": ["A公司"]}}]\n```', [T("质押", "质押"), A("质押", "质押方", "A公司")])
case("ee_string_for_list", "EE-joint", EE_L, '[{"event_type": "Attack", "trigger": "bombed", "arguments": {"Attacker": "Mary"}}]', [T("Attack", "bombed"), A("Attack", "Attacker", "Mary")])
case("ee_argument_pairs", "EE-joint", EE_L, '[{"event_type": "Attack", "trigger": "hit", "arguments": [{"role": "Place", "argument": "Berlin"}]}]', [T("Attack", "hit"), A("Attack", "Place", "Berlin")])
case("ee_hallucinated", "EE-joint", EE_L, '[{"event_type": "Attack", "trigger": "hit", "arguments": {}}, {"event_type": "Party", "trigger": "danced", "arguments": {"Host": ["X"]}}]', [T("Attack", "hit")])
case("ee_single_object", "EE-joint", EE_L, 'Result: {"event_type": "质押", "trigger": "出质", "arguments": {"质权方": ["人民银行"]}}', [T("质押", "出质"), A("质押", "质权方", "人民银行")])
case("ee_zh_preamble", "EE-joint", EE_L, '抽取结果：[{"event_type": "质押", "trigger": "质押", "arguments": {"质押方": ["百度"], "质权方": ["人民银行"]}}]。', [T("质押", "质押"), A("质押", "质押方", "百度"), A("质押", "质权方", "人民银行")])
case("ee_no_arguments", "EE-joint", EE_L, '[{"event_type": "Attack", "trigger": "attacked"}]', [T("Attack", "attacked")])
case("ee_empty_list", "EE-joint", EE_L, "[]", [])
case("ee_braces_in_strings", "EE-joint", EE_L, 'Note {draft}: [{"event_type": "Attack", "trigger": "hit {x}", "arguments": {"Attacker": ["a]b"]}}]', [T("Attack", "hit {x}"), A("Attack", "Attacker", "a]b")])
case("fail_no_json", "NER", NER_L, "no json at all", None)
case("fail_truncated", "NER", NER_L, '{"PER": ["张三"', None)
assert len(cases) == 40
with open(os.path.join(OUT, "malformed_outputs.json"), "w", encoding="utf-8", newline="\n") as f:
    json.dump(cases, f, ensure_ascii=False, indent=1)
    f.write("\n")
print("fixtures written to", os.path.normpath(OUT))
