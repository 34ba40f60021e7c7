"""wow: a word warehouse.

Turns a corpus of plain-text books into dictionary-encoded sparse data
cubes with literary dimension hierarchies, and answers rollup / drilldown /
slice / dice queries over them, including derived lexical measures.
"""

__version__ = "0.1.0"
