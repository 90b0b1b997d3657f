# Report and configuration models (JSON certificates)
