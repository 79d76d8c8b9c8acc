# Multimodal augmentation toolkit - Build Version

BUILD_VERSION = "1.0.0"
BUILD_DATE = "2026-10-18"
BUILD_ID = "initial-catalog"

# Changes in this build:
# - Image, text, audio and video transform catalogs with intensity scoring
# - Seeded compose/apply_with_probability core with nested metadata
# - Robustness eval harness and runtime benchmark
# - Typer CLI and FastAPI surface
