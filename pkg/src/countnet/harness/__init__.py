"""Data I/O, evaluation, order selection, studies and the command-line interface."""

from .evaluation import EvalReport, mape, mspe
from .io import read_adjacency, read_series_csv, split_train_test, write_fit_json
from .models import fit_model, predict
from .selection import backward_bic_select, bic
