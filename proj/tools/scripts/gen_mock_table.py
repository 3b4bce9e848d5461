#!/usr/bin/env python3
"""Regenerates data/mock_table.json and data/proper_nouns.txt.

The mock vocabulary is the union of a base word list, every word in the desk
corpus fixture and every word the mock itself can emit, so the simulated
typo corrector and judge recognise all clean text they will see.
"""
import json
import pathlib
import re

ROOT = pathlib.Path(__file__).resolve().parents[2]

PROPER_NOUNS = [
    "France", "Paris", "Japan", "Tokyo", "Earth", "Java", "Mona", "Lisa", "Pride", "Prejudice",
    "English", "Transformer", "ViT", "QLoRA", "LoRA", "ReLU", "Adam", "BERT", "GPT", "GAN", "CNN",
    "RNN", "LSTM", "VAE", "PCA", "SVM", "NLP", "HTTPS",
]

TERM_CORRECTIONS = {
    "VERT": "BERT", "GAM": "GAN", "VlT": "ViT", "LSMT": "LSTM", "CMM": "CNN", "RMN": "RNN",
    "GTP": "GPT", "LoRE": "LoRA", "QLoRE": "QLoRA", "NPL": "NLP", "SVN": "SVM", "PCS": "PCA",
    "VEA": "VAE", "ReLY": "ReLU", "Adma": "Adam",
}

PARAPHRASES = {
    "tell me about transformers": "Can you explain how Transformer-based neural networks work?",
}

DESCRIPTIONS = {
    "ViT": [
        {"text": "ViT, or Vision Transformer, is a deep learning model used for image recognition tasks.",
         "sufficient": True},
        {"text": "ViT is a neural network architecture used for image classification.", "sufficient": True},
        {"text": "ViT splits an image into patches and feeds them to a Transformer encoder.",
         "sufficient": True},
    ],
    "QLoRA": [
        {"text": "QLoRA is a method.", "sufficient": False},
        {"text": "QLoRA, or quantized low-rank adaptation, fine-tunes a quantized model through small low-rank adapter weights.",
         "sufficient": True},
        {"text": "QLoRA combines quantization with LoRA adapters to save memory during fine-tuning.",
         "sufficient": True},
    ],
    "LoRA": [
        {"text": "LoRA, or low-rank adaptation, trains small low-rank matrices instead of all model weights.",
         "sufficient": True},
        {"text": "LoRA is an efficient fine-tuning method for large models.", "sufficient": True},
    ],
    "VAE": [
        {"text": "A VAE is a model.", "sufficient": False},
        {"text": "A VAE, or variational autoencoder, learns a probabilistic latent space and decodes samples from it.",
         "sufficient": False},
        {"text": "VAE stands for variational autoencoder, a generative model trained with a reconstruction loss and a divergence penalty.",
         "sufficient": True},
    ],
    "PCA": [
        {"text": "PCA, or principal component analysis, projects data onto the directions of largest variance.",
         "sufficient": True},
    ],
    "SVM": [
        {"text": "An SVM, or support vector machine, finds the boundary with the largest margin between classes.",
         "sufficient": True},
    ],
    "ReLU": [
        {"text": "ReLU, or rectified linear unit, outputs the input when it is positive and zero otherwise.",
         "sufficient": True},
    ],
}

# Spec-level fixtures. Checked in order before the rule-based behaviour.
FIXTURES = [
    {"template": "judge_hallucination", "field": "answer", "match": "exact",
     "value": "Paris is the capital of France.", "response": "Score: 0.0"},
    {"template": "judge_hallucination", "field": "answer", "match": "exact",
     "value": "The capital of France is Atlantis, founded on the Moon in 1802.", "response": "Score: 1.0"},
    {"template": "judge_quality", "field": "answer", "match": "exact",
     "value": "Paris is the capital of France.", "response": "Score: 0.9"},
    {"template": "judge_quality", "field": "answer", "match": "exact",
     "value": "blorp fizz wug qqq", "response": "Quality: 10/100"},
    {"template": "judge_pairwise", "field": "question", "match": "prefix",
     "value": "[position-biased]", "response": "Verdict: A"},
    {"template": "judge_pairwise", "field": "question", "match": "prefix",
     "value": "[contrarian]", "response": "Verdict: B"},
    {"template": "classify", "field": "prompt", "match": "exact",
     "value": "[unparseable]", "response": "I cannot tell."},
]

BASE_WORDS = """
a about above across after again against all also always am an and any are around as ask at
away back be because been before being below best better between both but by can cannot city
come could day did different do does doing done down during each early end enough even every
explain explanation fast few find first for from full get give go good great had has have he
help her here high him his how i if in into is it its just keep kind know large last later
least less like long look made main make many may me mean meaning mind more most much must my
name near need new next no not now number of off often old on once one only or other our out
over own part people place point provided question quite rather real really right same say see
set should show side since small so some something state still such sure take tell than that
the their them then there these they thing think this those through time to today too two under
until up us use used uses using very want was way we well were what when where which while who
whole why will with within without word work world would year yes you your
answer answers addresses addressed context concept concepts short summary detail details
explained explains describe described description works working model models data system
systems method methods learning network networks neural deep training train trained image
images language languages text token tokens layer layers input inputs output outputs value
values weight weights parameter parameters function functions memory error errors task tasks
type types type based common general example examples process processes step steps result
results structure large small fine tuning tuned feature features generate generates generated
sequence sequences attention encoder decoder vision transformer transformers architecture
classification recognition patches patch feeds split splits quantized quantization adapter
adapters adaptation low rank matrices instead efficient stands generative reconstruction
divergence penalty probabilistic latent space decodes samples sample variational autoencoder
principal component analysis projects directions largest variance support vector machine
boundary margin classes rectified linear unit positive zero otherwise relational database
engine kind capital mountain tallest novel wrote painted planets ocean solar planet
""".split()


def words(text):
    return [w.lower() for w in re.findall(r"[A-Za-z]+", text)]


def main():
    vocab = set(BASE_WORDS)
    corpus = ROOT / "tests" / "fixtures" / "corpus_50.jsonl"
    for line in corpus.read_text().splitlines():
        vocab.update(words(json.loads(line)["text"]))
    for text in PARAPHRASES.values():
        vocab.update(words(text))
    for entries in DESCRIPTIONS.values():
        for e in entries:
            vocab.update(words(e["text"]))
    for noun in PROPER_NOUNS:
        vocab.add(noun.lower())
    vocab.update(["can", "you", "how", "based"])
    # Corrupted terms must stay out of the vocabulary so they read as noise.
    for bad in TERM_CORRECTIONS:
        vocab.discard(bad.lower())

    table = {
        "version": "1",
        "proper_nouns": PROPER_NOUNS,
        "vocabulary": sorted(vocab),
        "term_corrections": TERM_CORRECTIONS,
        "paraphrases": PARAPHRASES,
        "descriptions": DESCRIPTIONS,
        "fabrication": "is a kind of relational database engine.",
        "fixtures": FIXTURES,
    }
    (ROOT / "data" / "mock_table.json").write_text(json.dumps(table, indent=1, ensure_ascii=False) + "\n")
    (ROOT / "data" / "proper_nouns.txt").write_text("\n".join(PROPER_NOUNS) + "\n")


if __name__ == "__main__":
    main()
