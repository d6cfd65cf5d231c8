"""Live service: wire messages and the FastAPI app serving /sim."""
