#core/commands/fix_handler.py

from pathlib import Path

from core.analyzer import run_analysis
from core.commands.inputs import load_exclusions, load_rules, load_target, print_json, resolve_alert, warn
from core.corpus.index import apply_exclusion
from core.corpus.index_storage import atomic_write_json, load_index, save_cleanliness
from core.lang.codebase import write_source
from core.repair.prompt import RuleMetadata
from core.repair.session import ERROR, FIXED, run_session
from tools.llm_backends import create_backend

EXIT_CODES = {FIXED: 0, ERROR: 3}


def handle_fix_logic(args, config, logger) -> int:
    """
    Handles `fix --rules FILE --target DIR --alert ID [--index DIR] [--backend ...] [--dry-run]`.
    Exit 0 when fixed, 1 when every attempt failed, 3 on error.
    """
    program = load_rules(args.rules)
    target = load_target(args.target)
    alert = resolve_alert(run_analysis(program, target), args.alert)
    index = None
    if args.index:
        index = apply_exclusion(load_index(args.index, logger), load_exclusions(args.exclude))

    backend = create_backend(config, args.backend, logger)
    try:
        session = run_session(
            program, target, alert, index, config.retrieval_config(), backend,
            metadata=RuleMetadata.load(args.rules, logger),
            language=config.LANGUAGE,
            logger=logger,
        )
    finally:
        close = getattr(backend, "close", None)
        if close is not None:
            close()
    if index is not None:
        save_cleanliness(index, args.index, logger)

    if config.SESSION_LOG:
        atomic_write_json(session.to_dict(), config.SESSION_LOG, logger)
        logger.info(f"Session log written to {config.SESSION_LOG}")

    changed = session.changed_files(target)
    if changed and not args.dry_run:
        root = Path(args.target)
        for rel_path, text in changed.items():
            write_source(root / rel_path, text)
            logger.info(f"Patched {root / rel_path}")
    elif changed:
        warn(f"Dry run: {len(changed)} file(s) left untouched")

    summary = session.summary()
    summary["changed_files"] = sorted(changed)
    summary["dry_run"] = bool(args.dry_run)
    print_json(summary)
    return EXIT_CODES.get(session.status, 1)
