import sys

from tjpy_sampled_control.cli import main

sys.exit(main())
