"""Feed-forward networks and support-vector regression on lag/driver features."""
from .ann import AnnConfig, AnnModel, fit_ann, predict_ann
from .features import DesignMatrix, build_features, raw_features, standardize
from .svr import SvrConfig, SvrModel, fit_svr, predict_svr

__all__ = ["AnnConfig", "AnnModel", "fit_ann", "predict_ann", "DesignMatrix",
           "build_features", "raw_features", "standardize", "SvrConfig", "SvrModel",
           "fit_svr", "predict_svr"]
