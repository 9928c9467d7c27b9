"""
Negative network effects with NGNAR
===================================

Thinning cannot produce a negative neighbour coefficient, but a softplus
response can. Here beta = -0.8: busy neighbours mean a quiet node.
"""

import numpy as np

from countnet import ModelOrder, NgnarModel, fig1_network, fit_gnari_cls, fit_ngnar_cls, fit_ngnar_cmle, simulate_ngnar
from countnet.gnari import predict_gnari
from countnet.harness import mspe
from countnet.ngnar import predict_ngnar

net = fig1_network()
model = NgnarModel.from_coefficients(net, [0.1], [[-0.8]], 10.0)
series = simulate_ngnar(model, 500, 100, np.random.default_rng(3))
train, test = series.window(0, 450), series.window(450, 500)

# Lag-one correlation between a node and the mean of its neighbours
W = net.weight_matrix(1)
s = W @ series.data
print("node 1 vs neighbours:", np.corrcoef(series.data[0, 1:], s[0, :-1])[0, 1].round(3))

cls = fit_ngnar_cls(train, net, ModelOrder.simple())
cmle = fit_ngnar_cmle(train, net, ModelOrder.simple(), init=cls.values)
print("CLS ", cls.values.round(4), "converged", cls.converged)
print("CMLE", cmle.values.round(4), "converged", cmle.converged)

# GNARI has to clip beta at zero
gnari = fit_gnari_cls(train, net, ModelOrder.simple())
print("GNARI", gnari.values.round(4))

# Rolling one-step forecasts over the 50 held-out days, parameters fixed
predictors = {
    "ngnar": lambda t: predict_ngnar(cmle, series.data[:, :t], 1, net),
    "gnari": lambda t: predict_gnari(gnari, series.data[:, :t], 1, net),
}
for name, step in predictors.items():
    fc = np.hstack([step(t) for t in range(450, 500)])
    print(f"{name} rolling one-step MSPE {mspe(fc, test.data):.3f}")
