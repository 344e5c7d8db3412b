#!/usr/bin/env python3
"""
Free Field Lab
Command line entry point for noncommutative rank, rational identity testing and spectral predictions

Features:
- Inner rank certificates for linear pencils and polynomial matrices
- Zero tests and evaluation of noncommutative rational expressions
- Atom, entropy dimension and Hoelder predictions for selfadjoint pencils
- GUE simulations that compare predictions with empirical spectra
"""

import os
import sys
import json
import copy
import logging
import argparse
from typing import Dict, List, Optional

# Add src directory to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from FreeField import DivisionByZeroFunctionError, NotRegularError, evaluate_rf, from_expr, zero_test_report
from LinearPencil import LinearPencil, pencil_from_json
from NCPoly import (DimensionMismatchError, PolynomialSyntaxError, format_poly, matrix_to_json,
                    matrix_tuple_from_json, parse_poly, poly_matrix_from_json)
from NCRank import InconsistentRankError, hollow_rank_certificate, inner_rank_poly, is_full
from RationalExpression import DomainError, ExpressionSyntaxError, expr_to_json, linearize, parse
from RMTLab import simulate
from Spectra import NotSemiFlatError, VALIDITY_NOTE, entropy_dimension, full_spectrum, hoelder_constant, \
    log_energy_bound

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_INCONSISTENT = 3

logger = logging.getLogger(__name__)


def configure_logging(level: str = "INFO", log_file: Optional[str] = None):
    """Diagnostics go to stderr (and optionally a file); stdout carries JSON/CSV only"""

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, handlers=handlers)
    logging.getLogger().setLevel(getattr(logging, level))


class FreeFieldLab:
    """Command controller: loads configuration and runs one verb"""

    def __init__(self, config_path: str = "config.json"):
        self.config_path = config_path
        self.config = self._load_config()

    def _load_config(self) -> Dict:
        """Load configuration from file, merged section by section over the defaults"""

        config = self._get_default_config()
        try:
            if os.path.exists(self.config_path):
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    loaded = json.load(f)
                for section, values in loaded.items():
                    if isinstance(values, dict) and isinstance(config.get(section), dict):
                        config[section].update(values)
                    else:
                        config[section] = values
                logger.debug(f"Configuration loaded from {self.config_path}")
            else:
                logger.warning(f"Config file {self.config_path} not found, using defaults")
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error loading config: {e}")
        return config

    def _get_default_config(self) -> Dict:
        return copy.deepcopy({
            "logging": {"level": "WARNING", "file": None},
            "rank": {"seed": 0, "trials": 3, "max_doublings": 2, "probes": 16},
            "expressions": {"domain_tol": 1e-12, "zero_method": "rank"},
            "flatness": {"restarts": 64, "iters": 500, "step": 0.1},
            "spectra": {"cluster_tol": 1e-8},
            "simulation": {"dim": 500, "samples": 8, "window": 0.02, "shrink": 20, "anchors": 1000,
                           "deltas": [0.01, 0.05, 0.1, 0.5]},
            "parallel": {"n_jobs": 1},
        })

    # Inputs

    @staticmethod
    def _read_json(path: str) -> Dict:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def _load_pencil(self, path: str) -> LinearPencil:
        return pencil_from_json(self._read_json(path))

    def _seed(self, args) -> int:
        return self.config["rank"]["seed"] if args.seed is None else args.seed

    def _rank_options(self, args) -> Dict:
        rank = self.config["rank"]
        return {"trials": rank["trials"], "seed": self._seed(args), "probes": rank["probes"],
                "max_doublings": rank["max_doublings"], "n_jobs": self.config["parallel"]["n_jobs"]}

    def _flatness_options(self, args) -> Dict:
        flat = self.config["flatness"]
        return {"restarts": flat["restarts"], "iters": flat["iters"], "step": flat["step"],
                "seed": self._seed(args), "n_jobs": self.config["parallel"]["n_jobs"]}

    # Verbs

    def cmd_parse(self, args) -> int:
        if args.poly is not None:
            a = parse_poly(args.poly)
            _emit({"nvars": a.nvars, "degree": None if a.is_zero else a.degree, "text": format_poly(a)})
        else:
            _emit(expr_to_json(parse(args.expr)))
        return EXIT_OK

    def cmd_linearize(self, args) -> int:
        rep = linearize(parse(args.expr))
        out = rep.to_json()
        out["dimension"] = rep.dimension
        _emit(out)
        return EXIT_OK

    def cmd_rank(self, args) -> int:
        options = self._rank_options(args)
        if args.poly_matrix:
            P = poly_matrix_from_json(self._read_json(args.poly_matrix))
            method = args.method or 'blowup'
            rho = inner_rank_poly(P, method, trials=options["trials"], seed=options["seed"],
                                  max_doublings=options["max_doublings"])
            _emit({"rho": rho, "rows": P.rows, "cols": P.cols, "method": method})
            return EXIT_OK
        pencil = self._load_pencil(args.pencil)
        certificate = is_full(pencil, d=args.dim, **options)
        if args.hollow and not certificate.is_full:
            certificate = hollow_rank_certificate(pencil, certificate)
        _emit(certificate.to_json())
        return EXIT_OK

    def cmd_zerotest(self, args) -> int:
        rf = from_expr(parse(args.expr), **self._rank_options(args))
        method = args.method or self.config["expressions"]["zero_method"]
        if method == 'full_block':
            report = zero_test_report(rf, method, trials=self.config["rank"]["trials"], seed=self._seed(args))
        else:
            report = zero_test_report(rf, **self._rank_options(args))
        report["expr"] = args.expr
        _emit(report)
        return EXIT_OK if report["zero"] else EXIT_NEGATIVE

    def cmd_eval(self, args) -> int:
        r = parse(args.expr)
        rf = from_expr(r, **self._rank_options(args))
        X = matrix_tuple_from_json(self._read_json(args.tuple))
        tol = args.tol if args.tol is not None else self.config["expressions"]["domain_tol"]
        value = evaluate_rf(rf, X, tol)
        _emit({"dim": X.dim, "value": matrix_to_json(value)})
        return EXIT_OK

    def cmd_atoms(self, args) -> int:
        report = full_spectrum(self._load_pencil(args.pencil), trials=self.config["rank"]["trials"],
                               seed=self._seed(args), n_jobs=self.config["parallel"]["n_jobs"],
                               cluster_tol=self.config["spectra"]["cluster_tol"])
        _emit(report.to_json())
        return EXIT_OK

    def cmd_entropy_dim(self, args) -> int:
        report = full_spectrum(self._load_pencil(args.pencil), trials=self.config["rank"]["trials"],
                               seed=self._seed(args), cluster_tol=self.config["spectra"]["cluster_tol"])
        _emit({"delta_star": entropy_dimension(report), "atoms": len(report.atoms), "note": VALIDITY_NOTE})
        return EXIT_OK

    def cmd_hoelder(self, args) -> int:
        pencil = self._load_pencil(args.pencil)
        fisher = args.fisher if args.fisher is not None else float(pencil.n)
        constant = hoelder_constant(pencil, fisher, **self._flatness_options(args))
        out = constant.to_json()
        out["log_energy_bound"] = log_energy_bound(pencil, fisher, constant=constant)
        out["fisher_default"] = args.fisher is None
        _emit(out)
        return EXIT_OK

    def cmd_simulate(self, args) -> int:
        sim = self.config["simulation"]
        summary = simulate(self._load_pencil(args.pencil), dim=args.dim or sim["dim"],
                           samples=args.samples or sim["samples"], seed=self._seed(args),
                           window=args.window or sim["window"], shrink=sim["shrink"],
                           deltas=sim["deltas"], fisher=args.fisher,
                           anchors=sim["anchors"], n_jobs=self.config["parallel"]["n_jobs"])
        if args.format == 'csv':
            summary.eigenvalues.to_csv(sys.stdout, index=False)
            if args.summary:
                with open(args.summary, 'w', encoding='utf-8') as f:
                    json.dump(summary.to_json(), f, indent=2)
        else:
            if args.csv:
                summary.eigenvalues.to_csv(args.csv, index=False)
            _emit(summary.to_json())
        return EXIT_OK

    def run(self, args) -> int:
        handler = getattr(self, f"cmd_{args.verb.replace('-', '_')}")
        try:
            return handler(args)
        except InconsistentRankError as e:
            logger.error(f"Rank testers disagree: {e}")
            return EXIT_INCONSISTENT
        except NotRegularError as e:
            logger.error(f"Expression is not regular: {e}")
            _emit({"regular": False, "certificate": e.certificate.to_json() if e.certificate else None})
            return EXIT_INPUT
        except (ExpressionSyntaxError, PolynomialSyntaxError) as e:
            logger.error(f"Syntax error: {e}")
            return EXIT_INPUT
        except (DomainError, NotSemiFlatError, DivisionByZeroFunctionError, DimensionMismatchError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            return EXIT_INPUT
        except (OSError, ValueError) as e:
            logger.error(f"Bad input: {e}")
            return EXIT_INPUT
        except RuntimeError as e:
            logger.error(f"Internal error: {e}")
            return EXIT_INCONSISTENT


def _emit(payload: Dict):
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def create_argument_parser():
    """Create command line argument parser"""

    parser = argparse.ArgumentParser(
        description="Free Field Lab: noncommutative rank, rational identities and spectral predictions",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py zerotest --expr "y*inv(x*y)*x - 1"
  python main.py rank --pencil data/allones.json
  python main.py rank --poly-matrix data/rank_one_block.json
  python main.py atoms --pencil data/pauli3.json
  python main.py hoelder --pencil data/pauli3.json --fisher 3
  python main.py simulate --pencil data/allones.json --dim 500 --samples 8 --seed 0
        """
    )
    parser.add_argument("--config", "-c", type=str, default="config.json",
                        help="Path to configuration file (default: config.json)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None,
                        help="Set logging level (overrides the config file)")
    parser.add_argument("--version", "-v", action="version", version="Free Field Lab v0.1.0")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Random seed (default from config, 0)")

    verbs = parser.add_subparsers(dest="verb", required=True)

    p = verbs.add_parser("parse", parents=[common], help="Parse an expression or polynomial")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--expr", type=str)
    source.add_argument("--poly", type=str)

    p = verbs.add_parser("linearize", parents=[common], help="Formal linear representation of an expression")
    p.add_argument("--expr", type=str, required=True)

    p = verbs.add_parser("rank", parents=[common], help="Inner rank with certificate")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--pencil", type=str, help="Linear pencil JSON")
    source.add_argument("--poly-matrix", type=str, help="Polynomial matrix JSON")
    p.add_argument("--dim", type=int, default=None, help="Blow-up dimension (default N)")
    p.add_argument("--hollow", action="store_true", help="Rotate a non-full pencil into hollow form")
    p.add_argument("--method", choices=["blowup", "full_block"], default=None)

    p = verbs.add_parser("zerotest", parents=[common], help="Decide whether an expression is zero")
    p.add_argument("--expr", type=str, required=True)
    p.add_argument("--method", choices=["rank", "full_block"], default=None)

    p = verbs.add_parser("eval", parents=[common], help="Evaluate an expression at a matrix tuple")
    p.add_argument("--expr", type=str, required=True)
    p.add_argument("--tuple", type=str, required=True)
    p.add_argument("--tol", type=float, default=None)

    for verb, text in (("atoms", "Predicted atoms of a selfadjoint pencil"),
                       ("entropy-dim", "Entropy dimension from the predicted atoms")):
        p = verbs.add_parser(verb, parents=[common], help=text)
        p.add_argument("--pencil", type=str, required=True)

    p = verbs.add_parser("hoelder", parents=[common], help="Hoelder constant and log-energy bound")
    p.add_argument("--pencil", type=str, required=True)
    p.add_argument("--fisher", type=float, default=None, help="Fisher information (default: number of variables)")

    p = verbs.add_parser("simulate", parents=[common], help="Compare predictions with GUE spectra")
    p.add_argument("--pencil", type=str, required=True)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--fisher", type=float, default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--csv", type=str, default=None, help="Also write eigenvalues to this CSV (json format)")
    p.add_argument("--summary", type=str, default=None, help="Also write the JSON summary here (csv format)")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""

    parser = create_argument_parser()
    args = parser.parse_args(argv)

    lab = FreeFieldLab(args.config)
    configure_logging(args.log_level or lab.config["logging"]["level"], lab.config["logging"].get("file"))
    return lab.run(args)


if __name__ == "__main__":
    sys.exit(main())
