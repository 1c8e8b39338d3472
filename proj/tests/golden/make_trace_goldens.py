#!/usr/bin/env python3
"""Writes a sample weight trace and its expected HTML and ANSI renderings.

Usage: make_trace_goldens.py OUTDIR
"""
import html
import math
import os
import sys

MODE = "fusion:mean"
SEED = 11
STEPS = [  # (token id, token, w, p_s_top1, p_l_top1)
    (5, "The", 0.5, 0.4, 0.3),
    (6, "harbor", 1.0, 0.9, 0.1),
    (7, "<walk>", 0.0, 0.2, 0.8),
    (8, "&", 0.75, 0.5, 0.5),
    (9, "tide", 0.25, 0.5, 0.5),
    (10, "\"pools\"", 0.9, 0.6, 0.2),
    (11, "it's", 0.1, 0.2, 0.6),
    (12, "calm", 0.5000001, 0.3, 0.3),
    (0, "</s>", 0.6180339887, 0.7, 0.2),
]
EVENTS = [(7, "cloud unavailable, continuing with slm_only")]


def color(w, swap):
    intensity = abs(w - 0.5) * 2.0
    fade = int(math.floor(255.0 * (1.0 - intensity) + 0.5))
    if w == 0.5:
        return (255, 255, 255)
    slm_side = (w > 0.5) != swap
    return (fade, fade, 255) if slm_side else (255, fade, fade)


def hexc(c):
    return "#%02x%02x%02x" % c


def esc(s):
    return html.escape(s, quote=True).replace("&#x27;", "&#39;")


def render_html(swap, title="Weight trace"):
    slm, llm = color(1.0, swap), color(0.0, swap)
    out = ("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>%s</title>\n<style>\n"
           "body { font-family: sans-serif; }\n.trace span { padding: 1px 2px; }\n"
           ".legend span { display: inline-block; padding: 2px 8px; border: 1px solid #999; margin-right: 6px; }\n"
           "</style>\n</head>\n<body>\n" % esc(title))
    out += "<p class=\"meta\">mode %s, seed %d, %d tokens</p>\n" % (esc(MODE), SEED, len(STEPS))
    out += ("<div class=\"legend\"><span style=\"background-color:%s\">SLM (w = 1)</span>"
            "<span style=\"background-color:#ffffff\">balanced (w = 0.5)</span>"
            "<span style=\"background-color:%s\">LLM (w = 0)</span></div>\n" % (hexc(slm), hexc(llm)))
    spans = ["<span style=\"background-color:%s\" title=\"w=%.3f\">%s</span>" % (hexc(color(w, swap)), w, esc(tok))
             for _, tok, w, _, _ in STEPS]
    out += "<p class=\"trace\">" + " ".join(spans) + "</p>\n"
    for step, msg in EVENTS:
        out += "<p class=\"event\">step %d: %s</p>\n" % (step, esc(msg))
    return out + "</body>\n</html>\n"


def bg(c):
    return "\x1b[48;2;%d;%d;%dm\x1b[38;2;0;0;0m" % c


def render_ansi(swap):
    reset = "\x1b[0m"
    out = " ".join(bg(color(w, swap)) + tok + reset for _, tok, w, _, _ in STEPS) + "\n"
    out += ("legend: " + bg(color(1.0, swap)) + " SLM (w = 1) " + reset + " " + bg((255, 255, 255)) +
            " balanced (w = 0.5) " + reset + " " + bg(color(0.0, swap)) + " LLM (w = 0) " + reset + "\n")
    for step, msg in EVENTS:
        out += "event at step %d: %s\n" % (step, msg)
    return out


def trace_file():
    out = "# cogen-trace v1 mode=%s seed=%d\n" % (MODE, SEED)
    for k, (tid, tok, w, ps, pl) in enumerate(STEPS):
        out += "%d\t%d\t%s\t%.17g\t%.17g\t%.17g\n" % (k, tid, tok, w, ps, pl)
    for step, msg in EVENTS:
        out += "#event\t%d\t%s\n" % (step, msg)
    return out


def main():
    outdir = sys.argv[1]
    os.makedirs(outdir, exist_ok=True)
    files = {
        "sample.trace": trace_file(),
        "sample.html": render_html(False),
        "sample_swapped.html": render_html(True),
        "sample.ansi": render_ansi(False),
        "sample_swapped.ansi": render_ansi(True),
    }
    for name, text in files.items():
        with open(os.path.join(outdir, name), "w", encoding="utf-8", newline="") as f:
            f.write(text)


if __name__ == "__main__":
    main()
