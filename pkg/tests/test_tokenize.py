import pytest

from hatedetect.textio import tokenize


def test_lowercases_and_splits():
    assert tokenize("Morning Radio Hosts") == ["morning", "radio", "hosts"]


def test_url_normalized():
    assert tokenize("see https://example.com/x?y=1 now") == ["see", "<url>", "now"]
    assert tokenize("www.example.org rocks") == ["<url>", "rocks"]


def test_mention_normalized():
    assert tokenize("@some_user1 hello") == ["<user>", "hello"]


def test_number_normalized():
    assert tokenize("wait 10 minutes") == ["wait", "<num>", "minutes"]
    assert tokenize("3.5 or 1,000") == ["<num>", "or", "<num>"]


def test_hashtag_kept():
    assert tokenize("#topic stays") == ["#topic", "stays"]


def test_contraction_suffix_split():
    assert tokenize("i'm here, you're not") == [
        "i", "'m", "here", ",", "you", "'re", "not"]


def test_punctuation_isolated():
    assert tokenize("really?!") == ["really", "?", "!"]


def test_specials_pass_through():
    assert tokenize("<url> <user> <num>") == ["<url>", "<user>", "<num>"]


@pytest.mark.parametrize("text", ["", "   ", "\n\t"])
def test_empty_inputs(text):
    assert tokenize(text) == []


def test_idempotent_on_own_output():
    texts = [
        "Check https://a.b/c from @who at 12:30 #news, isn't it?",
        "plain words only",
        "#tag @user 99 bottles",
    ]
    for text in texts:
        once = tokenize(text)
        again = tokenize(" ".join(once))
        assert again == once


def test_deterministic():
    text = "Some MIXED case @input with 42 tokens http://x.y"
    assert tokenize(text) == tokenize(text)
