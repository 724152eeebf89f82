"""
Fixed synthetic vocabulary shared by every task, model and file format.
"""
from typing import Dict, Sequence

BOS = 0
EOS = 1             # stop token
ANSWER = 2          # precedes the final answer span
FILLER = 3          # semantically inert padding
PLUS = 4
COUNT = 5
INSTR_LEN = 6
INSTR_INCLUDE = 7
INSTR_EXCLUDE = 8
CHAT = 9
DIGITS = tuple(range(10, 20))
WORDS = tuple(range(20, 32))
VOCAB_SIZE = 32

_SPECIAL: Dict[int, str] = {
    BOS: "<bos>", EOS: "<eos>", ANSWER: "####", FILLER: "<pad>", PLUS: "+",
    COUNT: "<count>", INSTR_LEN: "<len>", INSTR_INCLUDE: "<include>",
    INSTR_EXCLUDE: "<exclude>", CHAT: "<chat>",
}


def digit(n: int) -> int:
    return DIGITS[n]


def digit_value(token: int) -> int:
    return token - DIGITS[0] if token in DIGITS else -1


def token_name(token: int) -> str:
    if token in _SPECIAL:
        return _SPECIAL[token]
    if token in DIGITS:
        return str(digit_value(token))
    if token in WORDS:
        return f"w{token - WORDS[0]}"
    return f"<{token}>"


def render(tokens: Sequence[int]) -> str:
    return " ".join(token_name(t) for t in tokens)


def strip_stop(tokens: Sequence[int], stop: int = EOS) -> tuple:
    """Tokens before the first stop token."""
    tokens = tuple(tokens)
    return tokens[:tokens.index(stop)] if stop in tokens else tokens
