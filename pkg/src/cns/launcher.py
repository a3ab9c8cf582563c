"""Console entry point.

``CNS_THREADS`` has to reach the BLAS and OpenMP runtimes before numpy is
imported, so this module sets the thread variables and only then loads the
real CLI.
"""

import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
               "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")


def apply_thread_cap(environ=os.environ) -> int | None:
    raw = environ.get("CNS_THREADS")
    if raw is None or raw == "":
        return None
    n = int(raw)
    if n < 1:
        raise ValueError
    for var in THREAD_VARS:
        environ[var] = str(n)
    return n


def main(argv=None) -> int:
    try:
        apply_thread_cap()
    except ValueError:
        print(f"error: CNS_THREADS must be a positive integer, got {os.environ['CNS_THREADS']!r}",
              file=sys.stderr)
        return 1
    from .cli import main as cli_main

    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
