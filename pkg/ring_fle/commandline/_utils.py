import argparse

from .._version import get_versions


class _ReportAndExit(argparse.Action):
    """
    Flag that prints a report and exits, ahead of any required subcommand.

    Subclasses implement ``report``, which returns the lines to print.
    """

    def __init__(self, option_strings, dest=argparse.SUPPRESS, default=argparse.SUPPRESS, help=None):
        super().__init__(option_strings=option_strings, dest=dest, default=default, nargs=0, help=help)

    def report(self):
        raise NotImplementedError

    def __call__(self, parser, namespace, values, option_string=None):
        for line in self.report():
            print(line)
        parser.exit()


class ShowVersionAction(_ReportAndExit):
    def report(self):
        return [get_versions()["version"]]


class ListProtocolsAction(_ReportAndExit):
    "One line per protocol, naming the attacks that target it."

    def report(self):
        from .._harness import ATTACKS, AttackSpec
        from .._ring import PROTOCOLS

        targets = {}
        for name in ATTACKS:
            targets.setdefault(AttackSpec.protocol_of(name), []).append(name)
        return [f"{protocol:<10} attacks: {', '.join(targets.get(protocol, ())) or '-'}" for protocol in PROTOCOLS]
