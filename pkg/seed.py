#!/usr/bin/env python3
"""
Corpus Seeding Script

Generates the default synthetic language suite (POS and span tasks) into the
configured corpus directory.
"""

import logging
import sys

from app.application.container import container
from app.application.domain.entities.corpus import DEFAULT_ENTITY_TYPES, LanguageProfile
from app.application.domain.errors import ToolkitError
from app.application.handler.commands.common import read_json
from app.infrastructure.config.settings import settings

MASTER_SEED = 0


def main() -> int:
    logging.basicConfig(level=settings.logging_level(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        document = read_json(settings.data_dir / "languages.json")
        profiles = [LanguageProfile.model_validate(entry) for entry in document["languages"]]
        entity_types = tuple(document.get("entity_types", DEFAULT_ENTITY_TYPES))
        use_case = container.generate_corpus_use_case()
        for task_kind in ("pos", "span"):
            use_case.execute(profiles, task_kind, MASTER_SEED, entity_types)
    except ToolkitError as exc:
        print(f"Error during seeding: {exc}", file=sys.stderr)
        return exc.exit_code
    print(f"Corpora written to {settings.corpus_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
