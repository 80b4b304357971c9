#core/commands/analyze_handler.py

from colorama import Fore

from core.analyzer import format_alert_id, run_analysis
from core.commands.inputs import load_rules, load_target, print_colored, print_json


def handle_analyze_logic(args, config, logger) -> int:
    """
    Handles `analyze --rules FILE --target DIR [--format text|json]`.
    Exit 0 whenever the analysis ran, alerts or not.
    """
    program = load_rules(args.rules)
    target = load_target(args.target)
    run = run_analysis(program, target)
    logger.info(f"Analysis of {args.target} with {program.rule_id}: {len(run.alerts)} alert(s)")

    alerts = [
        {"alert_id": format_alert_id(program, a), "rule_id": a.rule_id, "locations": a.locations(program)}
        for a in run.sorted_alerts()
    ]
    if args.format == "json":
        print_json(alerts)
    elif not alerts:
        print_colored(Fore.GREEN, f"No alerts for rule {program.rule_id}.")
    else:
        for alert in alerts:
            print_colored(Fore.RED, alert["alert_id"])
    return 0
