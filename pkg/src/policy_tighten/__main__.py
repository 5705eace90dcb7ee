"""Allow running as `python -m policy_tighten`."""

from policy_tighten.cli import main

main()
