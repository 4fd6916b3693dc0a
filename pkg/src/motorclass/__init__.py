"""EEG motor-attempt classification pipeline.

Band-pass filtering, per-epoch power spectral features, paired t-test
significance maps, five binary classifiers, and a rule-based fusion of the
top three, evaluated with stratified 3-fold cross-validation at trial
granularity.
"""

__version__ = "0.1.0"
