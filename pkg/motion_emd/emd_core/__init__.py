from motion_emd.emd_core.extrema import Extrema, find_extrema, count_zero_crossings
from motion_emd.emd_core.envelope import cubic_envelope, end_anchors
from motion_emd.emd_core.sifting import SiftConfig, ImfDecomposition, sift_one_imf, decompose
from motion_emd.emd_core.features import (EmdFeatureVector, featurize, decompose_trace,
                                          feature_length, feature_names, write_imf_csv)

__all__ = ['Extrema', 'find_extrema', 'count_zero_crossings', 'cubic_envelope', 'end_anchors',
           'SiftConfig', 'ImfDecomposition', 'sift_one_imf', 'decompose',
           'EmdFeatureVector', 'featurize', 'decompose_trace', 'feature_length',
           'feature_names', 'write_imf_csv']
