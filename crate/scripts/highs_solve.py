#!/usr/bin/env python3
"""Solve an MPS file with HiGHS and write a HiGHS raw solution file.

Usage: highs_solve.py MODEL.mps SOLUTION.sol [--time-limit SECONDS] [--threads N]
                      [--mip-gap GAP] [--start START.sol]

An empty or unreadable start file is ignored.
"""
import argparse
import os
import sys

import highspy


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("mps")
    parser.add_argument("sol")
    parser.add_argument("--time-limit", type=float, default=None)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--mip-gap", type=float, default=1e-9)
    parser.add_argument("--start", default=None)
    args = parser.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", args.threads)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("dual_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_rel_gap", args.mip_gap)
    h.setOptionValue("mip_abs_gap", 1e-9)
    if args.time_limit is not None:
        h.setOptionValue("time_limit", args.time_limit)
    if h.readModel(args.mps) != highspy.HighsStatus.kOk:
        print(f"failed to read {args.mps}", file=sys.stderr)
        return 2
    if args.start and os.path.getsize(args.start) > 0:
        if h.readSolution(args.start, 0) != highspy.HighsStatus.kOk:
            print(f"ignoring unreadable start {args.start}", file=sys.stderr)
    h.run()
    h.writeSolution(args.sol, 0)
    info = h.getInfo()
    print(f"status={h.modelStatusToString(h.getModelStatus())} "
          f"objective={info.objective_function_value} gap={info.mip_gap}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
