"""

This module contains the classifier containers, classifier synthesis (each real class's linear model is
the similarity-weighted combination of the base classifiers), and prediction.

Classifiers have no bias term. If one is wanted, append a constant feature to the data.

"""

import numpy as np
from .errors import *

#------------------------------------------------------------------------------------------------------------
class BaseClassifierSet(object):
    """The R base (phantom) classifiers v_r.

    Attributes:
        vectors (:obj:`np.ndarray`): Read-only (R x D) array.
        trainInfo (:obj:`dict`): Optimizer report from training (iterations, objective, gradient norm,
            converged flag, stop reason, objective history), or an empty dictionary.

    """

    def __init__(self, vectors, trainInfo = None):
        vectors=np.array(vectors, dtype = float)
        if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise ShapeMismatchError("base classifiers must be a 2d array with R >= 1 rows")
        vectors.setflags(write = False)
        self.vectors=vectors
        if trainInfo is None:
            trainInfo={}
        self.trainInfo=trainInfo


    @property
    def numBases(self):
        return self.vectors.shape[0]


    @property
    def featureDim(self):
        return self.vectors.shape[1]

#------------------------------------------------------------------------------------------------------------
class ClassifierSet(object):
    """Linear classifiers w_c for an ordered set of classes.

    Attributes:
        classIds (:obj:`list`): Class identifiers, in row order.
        vectors (:obj:`np.ndarray`): Read-only (C x D) array.

    """

    def __init__(self, classIds, vectors):
        vectors=np.array(vectors, dtype = float)
        if vectors.ndim != 2 or vectors.shape[0] < 1:
            raise ShapeMismatchError("classifiers must be a 2d array with at least one row")
        classIds=list(classIds)
        if len(classIds) != vectors.shape[0]:
            raise ShapeMismatchError("number of class ids (%d) does not match number of classifiers (%d)"
                                     % (len(classIds), vectors.shape[0]))
        vectors.setflags(write = False)
        self.classIds=classIds
        self.vectors=vectors


    @property
    def numClasses(self):
        return self.vectors.shape[0]


    @property
    def featureDim(self):
        return self.vectors.shape[1]

#------------------------------------------------------------------------------------------------------------
def synthesize(weights, bases):
    """Synthesizes classifiers w_c = sum_r s_cr v_r.

    Args:
        weights (:obj:`SimilarityMatrix`): Similarity weights (C x R).
        bases (:obj:`BaseClassifierSet`): Base classifiers (R x D).

    Returns:
        A :obj:`ClassifierSet` with one classifier per row of `weights`.

    """
    if weights.numPhantom != bases.numBases:
        raise ShapeMismatchError("similarity matrix has %d phantom columns but there are %d base classifiers"
                                 % (weights.numPhantom, bases.numBases))
    return ClassifierSet(weights.rowClasses, np.dot(weights.weights, bases.vectors))

#------------------------------------------------------------------------------------------------------------
def _asFeatureMatrix(features, featureDim):
    features=np.asarray(features, dtype = float)
    if features.ndim == 1:
        features=features.reshape(1, -1)
    if features.ndim != 2 or features.shape[1] != featureDim:
        raise DimensionMismatchError("features have shape %s but classifiers have dimension %d"
                                     % (str(features.shape), featureDim))
    return features

#------------------------------------------------------------------------------------------------------------
def decisionValues(models, features):
    """Returns the (N x C) matrix of decision values w_c^T x_n.

    """
    features=_asFeatureMatrix(features, models.featureDim)
    return np.dot(features, models.vectors.T)

#------------------------------------------------------------------------------------------------------------
def predict(models, x):
    """Returns the id of the class with the largest decision value for x (ties go to the lowest class
    index).

    """
    x=np.asarray(x, dtype = float)
    if x.ndim != 1:
        raise DimensionMismatchError("predict takes a single feature vector")
    scores=decisionValues(models, x)[0]
    return models.classIds[int(np.argmax(scores))]

#------------------------------------------------------------------------------------------------------------
def _topK(scores, k):
    # Stable sort on -scores keeps equal scores in index order
    return np.argsort(-scores, axis = -1, kind = 'stable')[..., :k]

#------------------------------------------------------------------------------------------------------------
def _checkK(k, numClasses):
    if int(k) != k or k < 1:
        raise KTooLargeError("K must be a positive integer (got %s)" % (str(k)))
    if k > numClasses:
        raise KTooLargeError("K = %d exceeds the number of classes (%d)" % (k, numClasses))

#------------------------------------------------------------------------------------------------------------
def rankClasses(models, x, k):
    """Returns the top-k class ids for x, by decision value (descending, ties to the lowest index).

    Args:
        models (:obj:`ClassifierSet`): Classifiers.
        x (:obj:`np.ndarray`): Feature vector.
        k (:obj:`int`): Number of classes to return (1 <= k <= number of classes).

    Returns:
        A list of class ids. The first element is always ``predict(models, x)``.

    """
    _checkK(k, models.numClasses)
    x=np.asarray(x, dtype = float)
    if x.ndim != 1:
        raise DimensionMismatchError("rankClasses takes a single feature vector")
    scores=decisionValues(models, x)[0]
    return [models.classIds[i] for i in _topK(scores, k)]

#------------------------------------------------------------------------------------------------------------
def predictBatch(models, features):
    """Returns an array of predicted class indices (into `models.classIds`), one per row of `features`.

    """
    return np.argmax(decisionValues(models, features), axis = 1)

#------------------------------------------------------------------------------------------------------------
def rankClassesBatch(models, features, k):
    """Returns the (N x k) array of top-k class indices (into `models.classIds`) for each row of
    `features`.

    """
    _checkK(k, models.numClasses)
    return _topK(decisionValues(models, features), k)
