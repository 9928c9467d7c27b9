"""
Simulating and fitting a GNARI(1, [1]) process
==============================================

A five-node network, one own lag and one neighbour stage. The counts are
thinned copies of last step's counts plus Poisson arrivals.
"""

import numpy as np

from countnet import GnariModel, ModelOrder, fig1_network, fit_gnari_cls, gnari_autocovariance, simulate_gnari
from countnet.gnari import predict_gnari

net = fig1_network()
print("stage-1 weights\n", net.weight_matrix(1).round(3))

# alpha = 0.5 on the own lag, beta = 0.4 on the neighbour average, lambda = 10
model = GnariModel.from_coefficients(net, [0.5], [[0.4]], 10.0)
print("stationarity margin", model.stationarity_margin())
print("stationary mean", model.stationary_mean())

rng = np.random.default_rng(1)
series = simulate_gnari(model, 500, 100, rng)
print("sample means", series.data.mean(axis=1).round(2))

# Constrained least squares; coefficients live in [0, 1] and lambda >= 0.
fit = fit_gnari_cls(series, net, ModelOrder.simple())
for name, value, se in zip(fit.params.names, fit.values, fit.standard_errors()):
    print(f"{name:>10} {value:8.4f}  (se {se:.4f})")

# The lag-one autocovariance of the true model against the data
gamma = gnari_autocovariance(model, 1)
x = series.data - series.data.mean(axis=1, keepdims=True)
print("model Gamma(1)[0, 0]", gamma[1][0, 0].round(2))
print("sample Gamma(1)[0, 0]", (x[0, 1:] @ x[0, :-1] / (x.shape[1] - 1)).round(2))

# Mean forecasts decay towards the stationary mean.
print(predict_gnari(fit, series.data, 5, net).round(2))
