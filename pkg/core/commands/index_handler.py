#core/commands/index_handler.py

from colorama import Fore

from core.commands.inputs import print_colored, warn
from core.corpus.index import build_index
from core.corpus.index_storage import save_index
from core.corpus.manifest import load_manifest


def handle_index_logic(args, config, logger) -> int:
    """Handles `index --manifest FILE --out DIR`."""
    manifest = load_manifest(args.manifest)
    index = build_index(manifest, workers=config.WORKERS, logger=logger)
    save_index(index, args.out, logger)

    for codebase_id, path, reason in index.skipped:
        warn(f"Skipped {codebase_id}/{path}: {reason}")
    print_colored(
        Fore.GREEN,
        f"Indexed {len(index.codebases)} codebase(s), {index.file_count} file(s), "
        f"{len(index.skipped)} skipped -> {args.out}",
    )
    return 0
