"""Deterministic synthetic chat corpus for desk-scale experiments.

Each transcript realizes one intent family: a set of question paraphrases
and answer wordings about a single issue, sharing lexical fillers.  Several
families answer with wording that shares no tokens with the question (
"are you with me ?" -> "sorry for the delay in responding .") so bag-of-words
baselines have a visible handicap.  The intent index is encoded in the
transcript id for use as a test oracle.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .corpus import AGENT, CUSTOMER, Tokens, Transcript, make_transcript, normalize_text
from .errors import InvalidSpec


@dataclass(frozen=True)
class IntentFamily:
    name: str
    question_patterns: tuple[str, ...]
    answer_patterns: tuple[str, ...]


_ITEMS = ("order", "package", "shoes", "book", "headphones", "charger", "jacket")

_BASE_FAMILIES: tuple[IntentFamily, ...] = (
    IntentFamily(
        "delivery_eta",
        (
            "when will i receive my {item} ?",
            "when will my {item} arrive ?",
            "how long until my {item} arrives ?",
            "what is the delivery date for my {item} ?",
        ),
        (
            "it will be delivered DATE .",
            "you will get the {item} on DATE .",
            "your {item} should arrive within NUMBER days .",
        ),
    ),
    IntentFamily(
        "cancel_order",
        (
            "can i cancel the {item} ?",
            "is it possible to cancel my {item} ?",
            "please can you cancel this {item} ?",
        ),
        (
            "i can cancel it for you .",
            "i 've cancelled it .",
            "which items you need to cancel ?",
            "the {item} has been cancelled just now .",
            "your {item} will not be charged .",
        ),
    ),
    IntentFamily(
        "presence",
        (
            "hi are you there ?",
            "hello are you still there ?",
            "are you with me ?",
        ),
        (
            "yes i 'm here .",
            "yes , i 'm checking it .",
            "sorry for the delay in responding .",
            "i 'm still looking into your {item} .",
        ),
    ),
    IntentFamily(
        "refund_status",
        (
            "ok you start the refund ?",
            "is the refund done ?",
            "did the refund already go through ?",
        ),
        (
            "the refund has been issued .",
            "you will see the amount back in NUMBER days .",
            "yes it is already processed .",
            "the money for the {item} is on its way back .",
            "the {item} refund shows on your statement DATE .",
        ),
    ),
    IntentFamily(
        "email_confirm",
        (
            "and will i be sent an email ?",
            "will i get an email confirmation ?",
            "do you send a confirmation email ?",
        ),
        (
            "yes , NAME .",
            "we will email you shortly .",
            "a confirmation will be sent to your email .",
            "an email about the {item} is on its way .",
        ),
    ),
    IntentFamily(
        "gift_card",
        (
            "how can i use the gift card balance ?",
            "can i pay with my gift card ?",
            "where do i redeem the gift card ?",
        ),
        (
            "you can use it on your next purchase .",
            "the balance applies automatically at checkout .",
            "the refund will be reflected in your gift card balance in the next 1-3 hour .",
            "the {item} can be paid with the gift card .",
        ),
    ),
    IntentFamily(
        "tracking",
        (
            "can you give me the tracking number ?",
            "what is the tracking number for my {item} ?",
            "how do i track my {item} ?",
        ),
        (
            "the tracking number is NUMBER .",
            "you can track it from your orders page .",
            "i 've shared the tracking details .",
            "the {item} tracking link was just sent to you .",
        ),
    ),
    IntentFamily(
        "address_change",
        (
            "can i change the delivery address ?",
            "is it possible to update my address ?",
            "can you ship it to a different address ?",
        ),
        (
            "i 've updated the address for you .",
            "sure , please share the new address .",
            "the address can be changed before it ships .",
            "the {item} will ship to the new address .",
        ),
    ),
    IntentFamily(
        "return_item",
        (
            "how do i return the {item} ?",
            "can i return this {item} ?",
            "what is the return process for the {item} ?",
        ),
        (
            "i 've created a return label for you .",
            "you can drop it at any NAME store .",
            "the return window is NUMBER days .",
            "the {item} return label is in your inbox .",
            "drop the {item} at the nearest locker .",
        ),
    ),
    IntentFamily(
        "exchange",
        (
            "can i exchange the {item} for another size ?",
            "is an exchange possible for this {item} ?",
            "how do i swap the {item} ?",
        ),
        (
            "i 've set up the exchange .",
            "a replacement will ship once we receive the original .",
            "yes , exchanges are free .",
            "the replacement {item} ships tonight .",
        ),
    ),
    IntentFamily(
        "ship_speed",
        (
            "can the ship speed be changed ?",
            "can you upgrade the shipping ?",
            "is faster delivery available ?",
        ),
        (
            "yes , i 've already upgraded .",
            "i 've changed it to one-day delivery .",
            "expedited handling is now applied .",
            "the {item} is now set for priority delivery .",
        ),
    ),
    IntentFamily(
        "not_shipped",
        (
            "why it has n't been shipped yet ?",
            "why is my {item} still preparing ?",
            "what is holding up the shipment ?",
        ),
        (
            "i am glad to check the status of your order .",
            "your order is already entered to the shipping process .",
            "it is out of stock .",
            "the {item} leaves the warehouse DATE .",
            "the {item} was delayed by a stock check .",
        ),
    ),
    IntentFamily(
        "invoice",
        (
            "can i get an invoice for my {item} ?",
            "where can i download the invoice ?",
            "could you email me the invoice ?",
        ),
        (
            "the invoice is available on the order details page .",
            "i 've sent it to your inbox .",
            "you will find it under your orders .",
            "the invoice for the {item} is attached .",
        ),
    ),
    IntentFamily(
        "damaged",
        (
            "my {item} arrived damaged , what now ?",
            "the {item} came broken , can you help ?",
            "what do i do with a damaged {item} ?",
        ),
        (
            "i 'm sorry about that , a replacement is on the way .",
            "we will pick up the damaged one DATE .",
            "you will not be charged for the return shipment .",
            "a new {item} has been dispatched free of charge .",
        ),
    ),
    IntentFamily(
        "wrong_item",
        (
            "i received the wrong {item} , what should i do ?",
            "this is not the {item} i ordered ?",
            "why did i get a different {item} ?",
        ),
        (
            "we will send the correct one right away .",
            "please keep it , the right one ships today .",
            "apologies , the warehouse mixed up the labels .",
            "the correct {item} is being packed now .",
        ),
    ),
    IntentFamily(
        "missing",
        (
            "my {item} says delivered but is missing ?",
            "where is my {item} , it never arrived ?",
            "the carrier marked it delivered but nothing came ?",
        ),
        (
            "please check with neighbors , it often turns up DATE .",
            "i 've opened an investigation with the carrier .",
            "we will reship or refund if it does not appear .",
            "the carrier is searching for your {item} .",
            "a trace was opened for the {item} today .",
        ),
    ),
    IntentFamily(
        "reorder",
        (
            "can you place the same order again ?",
            "how do i buy this {item} again ?",
            "is it easy to reorder the {item} ?",
        ),
        (
            "i 've added it to your cart .",
            "you can use the buy again page .",
            "done , the new order number is NUMBER .",
            "the same {item} was ordered again for you .",
        ),
    ),
    IntentFamily(
        "payment",
        (
            "can i change the payment method ?",
            "is it possible to use another card ?",
            "how do i update my card for this order ?",
        ),
        (
            "you can revise payment from the order page .",
            "i 've switched it to your default card .",
            "the charge will move to the new card .",
            "the {item} charge moved to the new card .",
        ),
    ),
    IntentFamily(
        "promo",
        (
            "why did my promo code not work ?",
            "can you apply the discount code ?",
            "is this coupon still valid ?",
        ),
        (
            "i 've applied it manually for you .",
            "that code expired DATE .",
            "the discount shows at the final checkout step .",
            "the discount now applies to the {item} .",
        ),
    ),
    IntentFamily(
        "warranty",
        (
            "does the {item} come with a warranty ?",
            "how long is the warranty on this {item} ?",
            "is the warranty included ?",
        ),
        (
            "it includes a NUMBER year manufacturer warranty .",
            "coverage details are on the product page .",
            "yes , and you can extend it .",
            "the {item} is covered for NUMBER years .",
        ),
    ),
    IntentFamily(
        "thanks_close",
        (
            "that is all i needed , ok ?",
            "we are done here , right ?",
            "nothing else , all set ?",
        ),
        (
            "glad i could help , have a great day .",
            "thanks for contacting us .",
            "take care , NAME .",
            "enjoy the {item} , NAME .",
        ),
    ),
    IntentFamily(
        "price_adjust",
        (
            "the price dropped , can i get the difference ?",
            "do you match the new lower price ?",
            "can you adjust the price on my {item} ?",
        ),
        (
            "i 've refunded the difference .",
            "we honor price drops within NUMBER days .",
            "the adjustment will post in 1-2 days .",
            "the lower price for the {item} was applied .",
        ),
    ),
    IntentFamily(
        "courier_contact",
        (
            "can you contact the courier for me ?",
            "could you check with the delivery driver ?",
            "is there a way to reach the carrier directly ?",
        ),
        (
            "i 've messaged the carrier just now .",
            "the driver will call you before arriving .",
            "we asked them to attempt delivery again DATE .",
            "the courier will deliver the {item} by NUMBER pm .",
        ),
    ),
    IntentFamily(
        "account_help",
        (
            "why can i not sign in to my account ?",
            "my login does not work , can you help ?",
            "how do i reset my password ?",
        ),
        (
            "i 've sent a reset link to your email address .",
            "your account is active again .",
            "please try the forgot password option .",
            "once signed in you can manage the {item} .",
        ),
    ),
)

_GREETINGS_CUSTOMER = ("hi .", "hello .", "good morning .")
_GREETINGS_AGENT = (
    "hello , how can i help you ?",
    "hi NAME , how may i assist you today ?",
)
_LEADINS = (
    "i ordered it NUMBER days ago .",
    "i have been waiting since DATE .",
)
_CLOSINGS_CUSTOMER = ("thank you .", "ok thanks .")
_CLOSINGS_AGENT = ("you 're welcome .", "happy to help .")


def _generic_family(index: int) -> IntentFamily:
    topic = f"case{index}"
    return IntentFamily(
        f"generic_{topic}",
        (
            f"any update on my {topic} request ?",
            f"what is the status of my {topic} request ?",
            f"when will the {topic} request be resolved ?",
        ),
        (
            f"the {topic} request will be resolved DATE .",
            f"our team is still reviewing the {topic} request .",
        ),
    )


def intent_families(n_intents: int) -> list[IntentFamily]:
    if n_intents < 2:
        raise InvalidSpec(f"need at least 2 intents, got {n_intents}")
    families = list(_BASE_FAMILIES[:n_intents])
    for i in range(len(families), n_intents):
        families.append(_generic_family(i))
    return families


_SLOT = re.compile(r"\{(\w+)\}")


def _realize(pattern: str, rng: np.random.Generator,
             shared: dict[str, str] | None = None) -> str:
    """Fill slots; a shared dict keeps fillers consistent across one exchange."""
    slots = set(_SLOT.findall(pattern))
    values = {}
    for slot in sorted(slots):
        if slot != "item":
            raise InvalidSpec(f"unknown slot {slot!r} in pattern {pattern!r}")
        if shared is not None and slot in shared:
            values[slot] = shared[slot]
        else:
            values[slot] = _ITEMS[int(rng.integers(len(_ITEMS)))]
            if shared is not None:
                shared[slot] = values[slot]
    return pattern.format(**values) if values else pattern


def _enumerate(pattern: str) -> list[str]:
    slots = sorted(set(_SLOT.findall(pattern)))
    if not slots:
        return [pattern]
    pools = [_ITEMS for _ in slots]
    return [
        pattern.format(**dict(zip(slots, combo)))
        for combo in itertools.product(*pools)
    ]


def generate_synthetic_corpus(
    n_intents: int, n_transcripts: int, seed: int
) -> list[Transcript]:
    """Build transcripts deterministically; ids look like ``s00042-i007``."""
    if n_transcripts < 1:
        raise InvalidSpec(f"need at least 1 transcript, got {n_transcripts}")
    families = intent_families(n_intents)
    rng = np.random.default_rng(seed)
    transcripts: list[Transcript] = []
    for serial in range(n_transcripts):
        intent = int(rng.integers(n_intents))
        fam = families[intent]
        raw: list[tuple[str, str]] = []
        if rng.random() < 0.45:
            raw.append((CUSTOMER, _GREETINGS_CUSTOMER[int(rng.integers(len(_GREETINGS_CUSTOMER)))]))
            raw.append((AGENT, _GREETINGS_AGENT[int(rng.integers(len(_GREETINGS_AGENT)))]))
        roll = rng.random()
        if roll < 0.25:
            n_exchanges = 1
        elif roll < 0.60:
            n_exchanges = 2
        elif roll < 0.85:
            n_exchanges = 3
        else:
            n_exchanges = 4
        for _ in range(n_exchanges):
            if rng.random() < 0.08:
                raw.append((CUSTOMER, _LEADINS[int(rng.integers(len(_LEADINS)))]))
            shared: dict[str, str] = {}
            q = _realize(fam.question_patterns[int(rng.integers(len(fam.question_patterns)))],
                         rng, shared)
            a = _realize(fam.answer_patterns[int(rng.integers(len(fam.answer_patterns)))],
                         rng, shared)
            raw.append((CUSTOMER, q))
            raw.append((AGENT, a))
        if rng.random() < 0.35:
            raw.append((CUSTOMER, _CLOSINGS_CUSTOMER[int(rng.integers(len(_CLOSINGS_CUSTOMER)))]))
            raw.append((AGENT, _CLOSINGS_AGENT[int(rng.integers(len(_CLOSINGS_AGENT)))]))
        if rng.random() < 0.08:
            # Trailing unanswered question: exercised by the mining rule.
            raw.append((CUSTOMER, _realize(
                fam.question_patterns[int(rng.integers(len(fam.question_patterns)))], rng)))
        transcripts.append(make_transcript(f"s{serial:05d}-i{intent:03d}", raw))
    return transcripts


def intent_of_transcript_id(tid: str) -> int:
    m = re.fullmatch(r"s\d+-i(\d+)", tid)
    if not m:
        raise ValueError(f"not a synthetic transcript id: {tid!r}")
    return int(m.group(1))


def question_intent_index(n_intents: int) -> dict[Tokens, int]:
    """Every realizable normalized question mapped to its intent."""
    index: dict[Tokens, int] = {}
    for i, fam in enumerate(intent_families(n_intents)):
        for pattern in fam.question_patterns:
            for text in _enumerate(pattern):
                index[tuple(normalize_text(text))] = i
    return index


def answer_intent_index(n_intents: int) -> dict[Tokens, int]:
    """Every realizable normalized answer mapped to its intent."""
    index: dict[Tokens, int] = {}
    for i, fam in enumerate(intent_families(n_intents)):
        for pattern in fam.answer_patterns:
            for text in _enumerate(pattern):
                index[tuple(normalize_text(text))] = i
    return index
