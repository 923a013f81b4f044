"""Verification pipeline for reimbursement-claim application bundles.

Ingests per-application document bundles, extracts structured fields
through a pluggable backend, evaluates a typology-aware catalog of
consistency checks, and renders tri-state review reports so human
reviewers only look at flagged items.
"""

__version__ = "0.1.0"
