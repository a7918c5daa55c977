"""Caption filtering and instruction-data construction.

The alignment pipeline mines a caption corpus for noun phrases, keeps the
phrases seen in more than `threshold` captions, walks them from rarest to
most common, and pulls in the captions containing each phrase (capped per
phrase, seeded sampling above the cap, global dedup).  Selected captions
become single-round video/question/answer records.

The instruction side builds chat-completion request payloads for three
generation kinds (detailed description, conversation, complex reasoning)
from fixed system templates and few-shot exemplars, and parses the model
responses back into QA pairs or a description.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .errors import ParseError
from .jsonish import find_brace_spans, parse_mapping

INSTRUCT_KINDS = ("detail_description", "conversation", "complex_reasoning")

VIDEO_MARKER = "<video>"


# ---------------------------------------------------------------------------
# phrase extraction

# Tiny part-of-speech lexicon for the built-in chunker.  Lookup order:
# determiner, adjective, noun, then everything else in OTHER breaks chunks;
# unknown words default to noun so novel content words still form phrases.
_DETERMINERS = frozenset(
    """a an the this that these those another each every either neither some
    any no his her its their our your my""".split()
)
_ADJECTIVES = frozenset(
    """young old new big small large little long short tall high low red
    green blue white black yellow brown gray grey pink purple orange happy
    sad angry calm quiet loud bright dark warm cold hot cool fast slow clean
    dirty empty full heavy light soft hard smooth rough wooden metal plastic
    golden silver tiny huge wild gentle fresh dry wet sunny cloudy rainy busy
    lazy furry fluffy shiny perfect beautiful pretty strange funny serious
    friendly personal favorite delicious colorful crowded modern ancient""".split()
)
_NOUNS = frozenset(
    """girl boy man woman person people crowd dog cat bird horse kitten puppy
    keyboard computer laptop chair table wall house home room kitchen garden
    park street road car bicycle bike train boat ball game pin pins lane
    alley video camera movie movies phone book guitar piano drum bottle
    glass cup plate food bread cake fruit apple banana water coffee tea milk
    grass tree flower leaf sky sun moon star rain snow beach sea ocean river
    mountain hill field background foil sister brother mother father family
    friend baby child children hand head face hair eye eyes finger fingers
    foot feet leg arm plaid brick appointment message strike gutter
    performer performers airport trick skill skills surface area jump flip
    flips platform landing weight trust vacation prank title caption
    description attempt edge edges side go string thing way day time year""".split()
)
_VERBS = frozenset(
    """is are was were be been being am has have had do does did doing done
    go goes going went gone make makes making made get gets getting got see
    sees seeing saw look looks looking looked watch watches watching watched
    play plays playing played sit sits sitting sat stand stands standing
    stood walk walks walking walked run runs running ran jump jumps jumping
    jumped hold holds holding held pick picks picking picked smile smiles
    smiling smiled laugh laughs laughing laughed ride rides riding rode eat
    eats eating ate drink drinks drinking drank cook cooks cooking cooked
    throw throws throwing threw catch catches catching caught swing swings
    swinging swung dance dances dancing danced sing sings singing sang talk
    talks talking talked speak speaks speaking spoke open opens opening
    opened close closes closing closed turn turns turning turned move moves
    moving moved lean leans leaning leaned rest rests resting rested lie
    lies lying lay sleep sleeps sleeping slept wait waits waiting waited
    give gives giving gave take takes taking took put puts putting use uses
    using used find finds finding found come comes coming came scratch
    scratches scratching scratched release releases releasing released toss
    tosses tossing tossed spin spins spinning spun strikes striking struck
    cover covers covering covered enter enters entering entered shelter
    sheltered land lands""".split()
)


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9']+", text.lower())


def _tag(token: str) -> str:
    if token in _DETERMINERS:
        return "det"
    if token in _ADJECTIVES:
        return "adj"
    if token in _NOUNS:
        return "noun"
    if token in _VERBS:
        return "verb"
    if token.isalpha() and len(token) <= 3:
        # short unknown words (on, to, of, and, ...) break chunks
        return "other"
    return "noun"


def noun_phrase_chunker(caption: str) -> list[str]:
    """Default extractor: maximal determiner? adjective* noun+ token runs."""
    tokens = _tokenize(caption)
    phrases = []
    i = 0
    while i < len(tokens):
        j = i
        if _tag(tokens[j]) == "det" and j + 1 < len(tokens):
            j += 1
        while j < len(tokens) and _tag(tokens[j]) == "adj":
            j += 1
        nouns = 0
        while j < len(tokens) and _tag(tokens[j]) == "noun":
            j += 1
            nouns += 1
        if nouns >= 1:
            phrases.append(" ".join(tokens[i:j]))
            i = j
        else:
            i += 1
    return phrases


def extract_phrases(caption: str, extractor=None) -> list[str]:
    """Normalized phrases of a caption, deduplicated in first-seen order.

    Duplicates within one caption count once toward corpus frequency.
    """
    if not caption:
        raise ValueError("caption must be non-empty")
    extractor = extractor or noun_phrase_chunker
    seen = set()
    out = []
    for phrase in extractor(caption):
        phrase = " ".join(phrase.lower().split())
        if phrase and phrase not in seen:
            seen.add(phrase)
            out.append(phrase)
    return out


def caption_contains_phrase(caption: str, phrase: str) -> bool:
    """Case-insensitive whole-word substring match on normalized tokens."""
    padded = " " + " ".join(_tokenize(caption)) + " "
    return f" {phrase} " in padded


# ---------------------------------------------------------------------------
# corpus filtering

@dataclass
class CaptionEntry:
    id: str
    video_path: str
    caption: str

    def __post_init__(self):
        if not self.caption:
            raise ValueError(f"caption for {self.id!r} must be non-empty")


@dataclass
class PhraseStats:
    phrase: str
    frequency: int
    caption_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.frequency != len(self.caption_ids):
            raise ValueError(
                f"{self.phrase!r}: frequency {self.frequency} != "
                f"{len(self.caption_ids)} caption ids"
            )


def build_candidate_set(
    corpus: list[CaptionEntry], extractor=None, threshold: int = 5
) -> list[PhraseStats]:
    """Phrases seen in strictly more than `threshold` captions, rarest first.

    Frequency counts captions, not occurrences; ties sort lexicographically.
    """
    if not corpus:
        raise ValueError("corpus must be non-empty")
    by_phrase: dict[str, list[str]] = {}
    for entry in corpus:
        for phrase in extract_phrases(entry.caption, extractor):
            by_phrase.setdefault(phrase, []).append(entry.id)
    stats = [
        PhraseStats(phrase=p, frequency=len(ids), caption_ids=ids)
        for p, ids in by_phrase.items()
        if len(ids) > threshold
    ]
    stats.sort(key=lambda s: (s.frequency, s.phrase))
    return stats


def select_alignment_captions(
    candidates: list[PhraseStats], cap: int = 100, seed: int = 0
) -> list[str]:
    """Walk candidates (assumed sorted rarest-first) and collect caption ids.

    Each phrase contributes all of its not-yet-selected captions, or a
    seeded uniform sample of exactly `cap` when more remain; a caption never
    enters twice.
    """
    if cap <= 0:
        raise ValueError(f"cap must be > 0, got {cap}")
    rng = random.Random(seed)
    seen: set[str] = set()
    selected: list[str] = []
    for stats in candidates:
        unseen = [cid for cid in stats.caption_ids if cid not in seen]
        if len(unseen) > cap:
            unseen = rng.sample(unseen, cap)
        for cid in unseen:
            seen.add(cid)
            selected.append(cid)
    return selected


# ---------------------------------------------------------------------------
# alignment records

DEFAULT_QUESTION_BANK = [
    "Describe the following video concisely.",
    "What is happening in the video?",
    "Summarize the visual content of the video.",
    "Give a short and clear account of what the video shows.",
    "Provide a brief caption for the video.",
    "What does this video show?",
]


@dataclass
class AlignmentRecord:
    """Single-round video/question/caption row for the alignment stage."""

    id: str
    video: str
    conversations: list[dict[str, str]]

    def __post_init__(self):
        if not self.conversations:
            raise ValueError("conversations must be non-empty")
        first = self.conversations[0]
        if first.get("from") != "human" or VIDEO_MARKER not in first.get("value", ""):
            raise ValueError(f"first turn must be human and contain {VIDEO_MARKER!r}")
        for i, turn in enumerate(self.conversations):
            expected = "human" if i % 2 == 0 else "gpt"
            if turn.get("from") != expected:
                raise ValueError(f"turn {i} must be from {expected!r}")

    def to_json(self) -> dict:
        return {"id": self.id, "video": self.video, "conversations": self.conversations}


def make_alignment_record(
    entry: CaptionEntry, question_bank: list[str] | None = None, seed: int = 0
) -> AlignmentRecord:
    """One human question (seeded pick) over the video, answered by the caption."""
    bank = DEFAULT_QUESTION_BANK if question_bank is None else question_bank
    if not bank:
        raise ValueError("question bank must be non-empty")
    question = random.Random(seed).choice(bank)
    return AlignmentRecord(
        id=entry.id,
        video=entry.video_path,
        conversations=[
            {"from": "human", "value": f"{question}\n{VIDEO_MARKER}"},
            {"from": "gpt", "value": entry.caption},
        ],
    )


# ---------------------------------------------------------------------------
# instruction-generation requests

DETAIL_DESCRIPTION_SYSTEM = (
    "You are an intelligent assistant that can understand video information "
    "through text descriptions. You can understand the overall content of the "
    "video from the title of the video, the caption of the video. Please "
    "describe the video you saw through the information given above. Don't "
    "mention the title in your description. Don't copy the original caption. "
    "Do not separately describe which objects are included in the video. It "
    "is necessary to integrate object information into your description "
    "through adjectives or attributive clauses. This description should be "
    "between 150 and 200 words."
)

CONVERSATION_SYSTEM = (
    "The task is to generate a conversation between two people. One person "
    "is watching at a video, and the other person is asking questions about "
    "the video. What they see will be provided below with some sentences. "
    "Include at least one complex question that requires reasoning and "
    "thinking. Only include the questions with certain answers that one can "
    "answer with the provided sentences. Make the QA sound like they are "
    "seeing the video. Do not use any words that may sound like looking at "
    'text instead of images, like "specify", "mention", "description", '
    '"text", "provided information", "sentence", "caption", etc.  Use words '
    'like "see", "look", "view", "show", etc. Format each QA pair in a '
    "single line as a JSON dictionary.  Do not include any other explanation."
)

COMPLEX_REASONING_SYSTEM = (
    "You are an AI visual assistant that can analyze a single video. You "
    "receive a title of this video and a caption of this video, each "
    "describing the same video you are observing. The task is to use the "
    "provided title and caption, create a plausible question about the "
    "video, and provide the answer in detail.Create complex questions beyond "
    "describing the scene.To answer such questions, one should require first "
    "understanding the visual content, then based on background knowledge or "
    "reasoning, either explain why things are happening that way, or provide "
    "guides and help to user's request. Make the question challenging by not "
    "including the visual content details in the question so that the user "
    "needs to reason about that first. When using the information from the "
    "caption, directly explain the scene, and do not mention that the "
    "information source is the caption. Always answer as if you are directly "
    "looking at the video."
)

_DETAIL_EXEMPLAR_TITLE = "Guy Scratches Head After Landing Perfect Bowling Strike"
_DETAIL_EXEMPLAR_CAPTION = (
    "This guy scratched his head in confusion after making a mind-blowing "
    "attempt at bowling. He swung his hand to release the ball but "
    "accidentally tossed it towards the gutter. However, it spun and turned "
    "at the side edges of the lane and then struck all pins in one go."
)
_DETAIL_EXEMPLAR_ANSWER = (
    "In the video, we see a man wearing a maroon shirt and shorts standing "
    "in a bowling alley, holding a bowling ball. First, he swings his hand "
    "to release the ball but accidentally tosses it towards the gutter. "
    "Next, the ball spins and turns at the side edges of the lane, seemingly "
    "heading towards the gutter, but suddenly changes direction and heads "
    "towards the pins. ..."
)

_REASONING_EXEMPLAR_TITLE = (
    "Woman Pranks Sister by Covering Inside of Her Whole House in Aluminium Foil"
)
_REASONING_EXEMPLAR_CAPTION = (
    "This woman had gone on a vacation. However, she was shocked when she "
    "entered her house on returning. Her sister had covered her whole house "
    "with aluminum foil from inside to prank her. She laughed uncontrollably "
    "as she saw everything covered in the foil."
)
_REASONING_EXEMPLAR_ANSWER = (
    '{"question": "Given the sister\'s initial reaction of uncontrollable '
    "laughter upon discovering the prank, how might this prank affect their "
    'relationship in the long run, considering psychological and social '
    'aspects?", "answer": "From a psychological perspective, humor plays a '
    "significant role in maintaining healthy relationships. The sister's "
    "reaction of laughter suggests that she found the prank amusing, which "
    "could enhance their bond. Shared laughter can increase feelings of "
    "intimacy and social cohesion, indicating that the prank may have "
    'strengthened their relationship. ..."}'
)


def format_instruct_payload(title: str, caption: str) -> str:
    return f"[title] {title} [Caption] {caption}"


@dataclass
class InstructRequest:
    """Chat-completion request: system template, few-shot exemplars, payload."""

    kind: str
    system: str
    exemplars: list[tuple[str, str]]
    user_payload: str

    def __post_init__(self):
        if self.kind not in INSTRUCT_KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        expected = 0 if self.kind == "conversation" else 1
        if len(self.exemplars) != expected:
            raise ValueError(f"{self.kind} carries {expected} exemplar(s)")

    def to_messages(self) -> list[dict[str, str]]:
        messages = [{"role": "system", "content": self.system}]
        for user, assistant in self.exemplars:
            messages.append({"role": "user", "content": user})
            messages.append({"role": "assistant", "content": assistant})
        messages.append({"role": "user", "content": self.user_payload})
        return messages


def make_instruct_request(kind: str, title: str, caption: str) -> InstructRequest:
    """Build the request payload for one generation kind."""
    if kind not in INSTRUCT_KINDS:
        raise ValueError(f"unknown kind {kind!r}, expected one of {INSTRUCT_KINDS}")
    if not title or not caption:
        raise ValueError("title and caption must be non-empty")
    if kind == "detail_description":
        system = DETAIL_DESCRIPTION_SYSTEM
        exemplars = [(
            format_instruct_payload(_DETAIL_EXEMPLAR_TITLE, _DETAIL_EXEMPLAR_CAPTION),
            _DETAIL_EXEMPLAR_ANSWER,
        )]
    elif kind == "conversation":
        system = CONVERSATION_SYSTEM
        exemplars = []
    else:
        system = COMPLEX_REASONING_SYSTEM
        exemplars = [(
            format_instruct_payload(_REASONING_EXEMPLAR_TITLE, _REASONING_EXEMPLAR_CAPTION),
            _REASONING_EXEMPLAR_ANSWER,
        )]
    return InstructRequest(
        kind=kind,
        system=system,
        exemplars=exemplars,
        user_payload=format_instruct_payload(title, caption),
    )


# ---------------------------------------------------------------------------
# response parsing

@dataclass
class ParsedInstructResponse:
    kind: str
    pairs: list[tuple[str, str]] = field(default_factory=list)
    description: str | None = None
    malformed: list[tuple[int, str]] = field(default_factory=list)


def _mapping_to_pair(mapping: dict) -> tuple[str, str]:
    if "question" not in mapping or "answer" not in mapping:
        raise ParseError("mapping lacks question/answer keys")
    return str(mapping["question"]), str(mapping["answer"])


def parse_instruct_response(kind: str, raw: str) -> ParsedInstructResponse:
    """Parse a generation response.

    conversation: one QA mapping per line, malformed lines collected with
    their line numbers.  complex_reasoning: exactly one QA mapping anywhere
    in the text.  detail_description: the trimmed text itself.
    """
    if kind not in INSTRUCT_KINDS:
        raise ValueError(f"unknown kind {kind!r}, expected one of {INSTRUCT_KINDS}")
    if not raw:
        raise ValueError("raw response must be non-empty")

    if kind == "detail_description":
        text = raw.strip()
        if not text:
            raise ParseError("empty description")
        return ParsedInstructResponse(kind=kind, description=text)

    if kind == "complex_reasoning":
        spans = find_brace_spans(raw)
        if len(spans) != 1:
            raise ParseError(f"expected exactly one QA mapping, found {len(spans)}")
        return ParsedInstructResponse(kind=kind, pairs=[_mapping_to_pair(parse_mapping(spans[0]))])

    pairs: list[tuple[str, str]] = []
    malformed: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        spans = find_brace_spans(line)
        if len(spans) != 1:
            malformed.append((lineno, line))
            continue
        try:
            pairs.append(_mapping_to_pair(parse_mapping(spans[0])))
        except ParseError:
            malformed.append((lineno, line))
    if not pairs:
        listing = ", ".join(f"line {n}: {text[:60]!r}" for n, text in malformed)
        raise ParseError(f"no parseable QA lines ({listing})")
    return ParsedInstructResponse(kind=kind, pairs=pairs, malformed=malformed)


# ---------------------------------------------------------------------------
# instruction records

DETAIL_QUESTION_BANK = [
    "Describe the video in detail.",
    "What is this video about? Walk me through everything that happens.",
    "Give an elaborate description of the video.",
    "Explain the content of the video thoroughly.",
]


@dataclass
class InstructRecord:
    """Instruction-tuning row: alignment-record fields plus v_id and source."""

    id: str
    v_id: str
    video: str
    source: str
    conversations: list[dict[str, str]]

    def __post_init__(self):
        if not self.conversations:
            raise ValueError("conversations must be non-empty")
        first = self.conversations[0]
        if first.get("from") != "human" or VIDEO_MARKER not in first.get("value", ""):
            raise ValueError(f"first turn must be human and contain {VIDEO_MARKER!r}")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "v_id": self.v_id,
            "video": self.video,
            "source": self.source,
            "conversations": self.conversations,
        }


def build_instruct_record(
    record_id: str,
    video: str,
    parsed: ParsedInstructResponse,
    v_id: str | None = None,
    source: str = "local",
    seed: int = 0,
) -> InstructRecord:
    """Turn a parsed response into a record; the video marker leads turn one."""
    conversations: list[dict[str, str]] = []
    if parsed.kind == "detail_description":
        question = random.Random(seed).choice(DETAIL_QUESTION_BANK)
        qa_pairs = [(question, parsed.description or "")]
    else:
        qa_pairs = parsed.pairs
    if not qa_pairs or not qa_pairs[0][1]:
        raise ValueError("parsed response has no content to record")
    for i, (question, answer) in enumerate(qa_pairs):
        value = f"{VIDEO_MARKER}\n{question}" if i == 0 else question
        conversations.append({"from": "human", "value": value})
        conversations.append({"from": "gpt", "value": answer})
    return InstructRecord(
        id=record_id,
        v_id=v_id if v_id is not None else record_id,
        video=video,
        source=source,
        conversations=conversations,
    )
