"""Shared fixtures: small hand-built documents used across test modules."""

from __future__ import annotations

import pytest

from landex.docmodel import BoxDocument, TextBox, TreeDocument, TreeNode


def node(tag, *children, text="", **attrs):
    """Terse tree-construction helper."""
    return TreeNode(tag=tag, attrs=attrs, text=text, children=list(children))


@pytest.fixture
def itinerary_doc():
    """A two-leg trip summary: the classic landmark/value row layout.

    body
      div.header > h1 "Trip Summary"
      table
        tr > td "Depart:" | td "8:18 PM"
        tr > td "Arrive:" | td "11:45 PM"
      table
        tr > td "Depart:" | td "6:10 AM"
        tr > td "Arrive:" | td "9:02 AM"
    """
    return TreeDocument(
        node(
            "body",
            node("div", node("h1", text="Trip Summary"), **{"class": "header"}),
            node(
                "table",
                node("tr", node("td", text="Depart:"), node("td", text="8:18 PM")),
                node("tr", node("td", text="Arrive:"), node("td", text="11:45 PM")),
            ),
            node(
                "table",
                node("tr", node("td", text="Depart:"), node("td", text="6:10 AM")),
                node("tr", node("td", text="Arrive:"), node("td", text="9:02 AM")),
            ),
        ),
        doc_id="trip",
    )


def grid_boxes():
    """A 2x2 grid of labeled boxes (uniform 40x12 cells, 10px gaps)."""
    return [
        TextBox("TL", 10, 10, 40, 12),
        TextBox("TR", 60, 10, 40, 12),
        TextBox("BL", 10, 32, 40, 12),
        TextBox("BR", 60, 32, 40, 12),
    ]


@pytest.fixture
def grid_doc():
    return BoxDocument(grid_boxes(), doc_id="grid")
