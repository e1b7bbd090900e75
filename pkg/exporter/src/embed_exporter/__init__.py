"""Offline embedding exporter: corpus JSONL in, ALEMB1 matrix out."""

from .export import ExportJob, export, main

__all__ = ["ExportJob", "export", "main"]
