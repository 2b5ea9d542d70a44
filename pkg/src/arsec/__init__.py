"""arsec: server-side AR secretary pipeline.

Ingests timestamped face images and conversation audio, identifies people by
face embedding, distills transcripts into structured memory records, and
serves a low-latency display snapshot plus a retrieval/editing API.
"""

__version__ = "0.1.0"
