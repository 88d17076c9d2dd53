"""reasonforge: synthesize program-guided reasoning SFT data.

The package turns a corpus of algorithm problems (statement + reference
solution) into natural-language reasoning problems with verified gold
answers and step-by-step reasoning targets.  The stages:

1. generate concrete test cases per problem and curate them,
2. rewrite (problem, case) into a themed natural-language problem,
3. filter with solvability / consistency judges,
4. rewrite the reference solution into a case-specific program that
   prints its intermediates plus a final ``result:`` line, execute it
   under resource limits, and parse the trace,
5. filter on execution health, then synthesize a reasoning text guided
   by the trace and ending in a checked ``Final answer:`` line,
6. assemble, dedupe-check, and export the final JSONL dataset.

``reasonforge.pipeline`` orchestrates the stages with per-item
checkpointing; ``reasonforge.service`` wraps the pipeline in a FastAPI
app and ``reasonforge.cli`` is a thin HTTP client for it.
"""

__version__ = "0.1.0"
