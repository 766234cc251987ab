"""HTTP facade and shared request handlers.

The CLI calls the handler functions in-process by default; the FastAPI
app exposes the same handlers over HTTP so batch jobs can run against a
long-lived server that keeps its caches warm.
"""
