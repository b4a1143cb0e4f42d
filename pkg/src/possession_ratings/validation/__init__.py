"""Predictive validation of player ratings on match outcomes."""
from .elo import EloTable, parse_elo, write_elo_csv
from .matches import (MatchRecord, attach_lineups, parse_matches, parse_wyscout_matches,
                      write_matches_csv)
from .models import BPModel, Forecast, OLRModel, fit_bp, fit_olr, simulate_bp, simulate_olr
from .protocol import (ProtocolResult, check_no_leak, reference_models, run_protocol,
                       strength_deltas, team_strength)
from .scoring import (LossTable, TTestResult, brier, informational_loss, paired_ttest,
                      score_forecasts)

__all__ = [
    "EloTable", "parse_elo", "write_elo_csv", "MatchRecord", "attach_lineups", "parse_matches",
    "parse_wyscout_matches", "write_matches_csv", "BPModel", "Forecast", "OLRModel", "fit_bp",
    "fit_olr", "simulate_bp", "simulate_olr", "ProtocolResult", "check_no_leak",
    "reference_models", "run_protocol", "strength_deltas", "team_strength", "LossTable",
    "TTestResult", "brier", "informational_loss", "paired_ttest", "score_forecasts",
]
