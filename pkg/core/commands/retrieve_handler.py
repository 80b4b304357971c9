#core/commands/retrieve_handler.py

from core.analyzer import run_analysis
from core.commands.inputs import load_exclusions, load_rules, load_target, print_json, resolve_alert
from core.corpus.index import apply_exclusion, select_corpus
from core.corpus.index_storage import load_index, save_cleanliness
from core.repair.prompt import alert_context
from core.retrieval.key_examples import identify_key_examples, oracle_key_examples
from core.retrieval.ranking import flatten, prioritize


def example_record(example) -> dict:
    return {
        "predicate": example.predicate,
        "codebase": example.codebase,
        "file": example.snippet.file,
        "line": example.snippet.line,
        "source": example.source,
        "score": example.score,
        "match_count": example.match_count,
        "context": example.context_text,
    }


def handle_retrieve_logic(args, config, logger) -> int:
    """
    Handles `retrieve --rules FILE --target DIR --alert ID --index DIR [--oracle] [--limit N]`.
    Prints the prioritized key examples as JSON.
    """
    program = load_rules(args.rules)
    target = load_target(args.target)
    run = run_analysis(program, target)
    alert = resolve_alert(run, args.alert)
    rconfig = config.retrieval_config()

    index = load_index(args.index, logger)
    index = apply_exclusion(index, load_exclusions(args.exclude))
    corpus = select_corpus(index, program, rconfig.literal_top_k, rconfig.literal_min_len)

    if args.oracle:
        logger.info("Using the brute-force retrieval path")
        examples = oracle_key_examples(program, target, alert, corpus, rconfig)
    else:
        examples = identify_key_examples(program, run, alert, corpus, rconfig, logger)
    save_cleanliness(index, args.index, logger)

    _, query = alert_context(program, target, alert, rconfig.alert_context)
    ranked = flatten(prioritize(examples, query, rconfig))
    if args.limit is not None:
        ranked = ranked[:max(0, args.limit)]
    print_json([example_record(ex) for ex in ranked])
    return 0
