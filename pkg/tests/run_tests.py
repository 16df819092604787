#!/usr/bin/env python3
"""
Main test runner for the citedrift test suite.
This script provides a unified interface to run different groups of tests through pytest.
"""

import argparse
import subprocess
import sys
from pathlib import Path

from settings import INTEGRATION_TESTS, UNIT_TESTS, VERBOSE_OUTPUT, get_config_summary

TESTS_DIR = Path(__file__).parent


def run_pytest(paths, extra_args=None):
    """Run pytest on the given paths; returns True on success"""
    cmd = [sys.executable, "-m", "pytest", *[str(p) for p in paths], *(extra_args or [])]
    if VERBOSE_OUTPUT:
        cmd.append("-v")
    print(f"\n📋 {' '.join(cmd)}")
    print("=" * 50)
    try:
        result = subprocess.run(cmd, cwd=TESTS_DIR.parent)
    except OSError as e:
        print(f"❌ Error running pytest: {e}")
        return False
    if result.returncode != 0:
        print(f"❌ pytest failed with exit code {result.returncode}")
        return False
    return True


def run_unit_tests(module: str = "all", **kwargs):
    """Run unit tests"""
    test_dir = TESTS_DIR / "unit"
    if module == "all":
        print("🚀 Running all unit tests...")
        tests = UNIT_TESTS
    elif f"test_{module}.py" in UNIT_TESTS:
        tests = [f"test_{module}.py"]
    else:
        print(f"❌ Unknown unit test module: {module}")
        return False
    return run_pytest([test_dir / t for t in tests], kwargs.get("pytest_args"))


def run_integration_tests(test_type: str = "all", **kwargs):
    """Run integration tests"""
    test_dir = TESTS_DIR / "integration"
    if test_type == "all":
        print("🚀 Running all integration tests...")
        tests = INTEGRATION_TESTS
    elif test_type == "pipeline":
        tests = ["test_pipeline.py"]
    elif test_type == "drift":
        tests = ["test_drift_experiment.py"]
    else:
        print(f"❌ Unknown integration test type: {test_type}")
        return False
    return run_pytest([test_dir / t for t in tests], kwargs.get("pytest_args"))


def main():
    parser = argparse.ArgumentParser(description="citedrift Test Runner")
    subparsers = parser.add_subparsers(dest='command', help='Test commands')

    # Unit tests
    unit_parser = subparsers.add_parser('unit', help='Run unit tests')
    unit_parser.add_argument('--module', default='all',
                             help='Module to test (corpus, preprocess, vocab, sgns, align, ...)')

    # Integration tests
    integration_parser = subparsers.add_parser('integration', help='Run integration tests')
    integration_parser.add_argument('--type', choices=['all', 'pipeline', 'drift'],
                                    default='all', help='Type of integration test to run')

    # Quick commands
    quick_parser = subparsers.add_parser('quick', help='Quick test commands')
    quick_parser.add_argument('action', choices=['fast', 'all', 'config'],
                              help='fast skips the multi-seed experiments')

    args, pytest_args = parser.parse_known_args()

    if not args.command:
        parser.print_help()
        return

    if args.command == 'unit':
        success = run_unit_tests(args.module, pytest_args=pytest_args)
    elif args.command == 'integration':
        success = run_integration_tests(args.type, pytest_args=pytest_args)
    elif args.action == 'fast':
        success = run_pytest([TESTS_DIR], ["-m", "not slow", *pytest_args])
    elif args.action == 'all':
        success = run_pytest([TESTS_DIR], pytest_args)
    else:
        for key, value in get_config_summary().items():
            print(f"{key}: {value}")
        success = True

    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
