"""

This module contains the ConSE baseline: multinomial logistic regression classifiers for the seen classes,
whose top-T class probabilities are used to form a convex combination of seen-class embeddings. Unseen
classes are then ranked by cosine similarity to that combined embedding.

"""

import numpy as np
from scipy.special import softmax, logsumexp
from .errors import *
from .training import minimize, TrainConfig

#------------------------------------------------------------------------------------------------------------
class ProbabilisticClassifierSet(object):
    """Multinomial logistic regression classifiers for the seen classes.

    Attributes:
        weights (:obj:`np.ndarray`): Read-only (S x D) array.
        biases (:obj:`np.ndarray`): Read-only length S array.
        classIds (:obj:`list`): Seen class identifiers.
        trainInfo (:obj:`dict`): Solver report (see :func:`training.minimize`).

    """

    def __init__(self, weights, biases, classIds = None, trainInfo = None):
        weights=np.array(weights, dtype = float)
        biases=np.array(biases, dtype = float)
        if weights.ndim != 2 or biases.ndim != 1 or biases.shape[0] != weights.shape[0]:
            raise ShapeMismatchError("need an (S x D) weight array and a length S bias array")
        if np.all(np.isfinite(weights)) == False or np.all(np.isfinite(biases)) == False:
            raise NonFiniteError("classifier parameters contain NaN or Inf values")
        if classIds is None:
            classIds=list(range(weights.shape[0]))
        weights.setflags(write = False)
        biases.setflags(write = False)
        self.weights=weights
        self.biases=biases
        self.classIds=list(classIds)
        if trainInfo is None:
            trainInfo={}
        self.trainInfo=trainInfo


    @property
    def numClasses(self):
        return self.weights.shape[0]


    @property
    def featureDim(self):
        return self.weights.shape[1]


    def probabilities(self, features):
        """Returns the (N x S) array of class probabilities (rows sum to 1).

        """
        features=np.asarray(features, dtype = float)
        if features.ndim == 1:
            features=features.reshape(1, -1)
        if features.shape[1] != self.featureDim:
            raise DimensionMismatchError("features have dimension %d but classifiers have dimension %d"
                                         % (features.shape[1], self.featureDim))
        return softmax(np.dot(features, self.weights.T)+self.biases, axis = 1)

#------------------------------------------------------------------------------------------------------------
class ConseConfig(object):
    """Settings for ConSE.

    Args:
        T (:obj:`int`, optional): Number of top seen classes combined (1 <= T <= S at prediction time).
        l2Reg (:obj:`float`, optional): l2 regularization weight on the logistic regression weights.

    """

    def __init__(self, T = 10, l2Reg = 1e-2):
        if int(T) != T or T < 1:
            raise InvalidSpecError("T must be an integer >= 1")
        if l2Reg < 0:
            raise InvalidSpecError("l2Reg must be >= 0")
        self.T=int(T)
        self.l2Reg=float(l2Reg)

#------------------------------------------------------------------------------------------------------------
def _unpack(params, numClasses, featureDim):
    return params[:, :featureDim], params[:, featureDim]

#------------------------------------------------------------------------------------------------------------
def _logisticParts(params, data, l2Reg):
    W, b=_unpack(params, data.numClasses, data.featureDim)
    logits=np.dot(data.features, W.T)+b
    logZ=logsumexp(logits, axis = 1)
    rows=np.arange(data.numSamples)
    value=float(np.sum(logZ-logits[rows, data.labels]))+0.5*l2Reg*float(np.sum(W*W))
    residual=np.exp(logits-logZ[:, np.newaxis])
    residual[rows, data.labels]-=1.0
    grad=np.zeros(params.shape)
    grad[:, :data.featureDim]=np.dot(residual.T, data.features)+l2Reg*W
    grad[:, data.featureDim]=residual.sum(axis = 0)
    return value, grad

#------------------------------------------------------------------------------------------------------------
def logisticObjective(params, data, l2Reg):
    """Negative log-likelihood of multinomial logistic regression plus (l2Reg/2)||W||^2 (the biases are
    not regularized).

    Args:
        params (:obj:`np.ndarray`): (S x (D+1)) array; the last column holds the biases.
        data (:obj:`LabeledDataset`): Training data.
        l2Reg (:obj:`float`): Regularization weight.

    Returns:
        Objective value.

    """
    params=np.asarray(params, dtype = float)
    if params.shape != (data.numClasses, data.featureDim+1):
        raise ShapeMismatchError("params must have shape (%d, %d)" % (data.numClasses, data.featureDim+1))
    return _logisticParts(params, data, l2Reg)[0]

#------------------------------------------------------------------------------------------------------------
def logisticGradient(params, data, l2Reg):
    """Gradient of :func:`logisticObjective` (same shape as params).

    """
    params=np.asarray(params, dtype = float)
    if params.shape != (data.numClasses, data.featureDim+1):
        raise ShapeMismatchError("params must have shape (%d, %d)" % (data.numClasses, data.featureDim+1))
    return _logisticParts(params, data, l2Reg)[1]

#------------------------------------------------------------------------------------------------------------
def trainSeenProbabilistic(data, l2Reg, trainConfig = None, verbose = False):
    """Fits multinomial logistic regression to the seen-class data by gradient descent with line search,
    starting from zero.

    Returns:
        A :obj:`ProbabilisticClassifierSet` (the solver report, including the converged flag, is in its
        trainInfo attribute).

    """
    if data.numClasses < 2:
        raise TooFewClassesError("logistic regression needs at least 2 classes")
    if l2Reg < 0:
        raise InvalidSpecError("l2Reg must be >= 0")
    if trainConfig is None:
        trainConfig=TrainConfig()

    def func(params):
        return _logisticParts(params, data, l2Reg)

    params, info=minimize(func, np.zeros((data.numClasses, data.featureDim+1)), trainConfig,
                          verbose = verbose, label = "logistic objective")
    W, b=_unpack(params, data.numClasses, data.featureDim)

    return ProbabilisticClassifierSet(W, b, classIds = data.classIds, trainInfo = info)

#------------------------------------------------------------------------------------------------------------
def _checkT(T, numClasses):
    if int(T) != T or T < 1:
        raise KTooLargeError("T must be a positive integer (got %s)" % (str(T)))
    if T > numClasses:
        raise KTooLargeError("T = %d exceeds the number of seen classes (%d)" % (T, numClasses))

#------------------------------------------------------------------------------------------------------------
def conseEmbedBatch(features, clf, seen, T):
    """As :func:`conseEmbed`, for each row of `features`; returns an (N x d) array.

    """
    _checkT(T, clf.numClasses)
    if seen.numClasses != clf.numClasses:
        raise ShapeMismatchError("seen embeddings have %d classes but there are %d classifiers" % (seen.numClasses, clf.numClasses))
    probs=clf.probabilities(features)
    top=np.argsort(-probs, axis = 1, kind = 'stable')[:, :T]
    topProbs=np.take_along_axis(probs, top, axis = 1)
    topProbs=topProbs/topProbs.sum(axis = 1, keepdims = True)
    return np.einsum('nt,ntd->nd', topProbs, seen.vectors[top])

#------------------------------------------------------------------------------------------------------------
def conseEmbed(x, clf, seen, T):
    """Maps x into the semantic space as sum_t p_t a_t / sum_t p_t over the T most probable seen classes.

    Args:
        x (:obj:`np.ndarray`): Feature vector.
        clf (:obj:`ProbabilisticClassifierSet`): Seen-class classifiers.
        seen (:obj:`EmbeddingTable`): Seen-class embeddings (same class order as `clf`).
        T (:obj:`int`): Number of seen classes to combine.

    Returns:
        Semantic vector (:obj:`np.ndarray`).

    """
    x=np.asarray(x, dtype = float)
    if x.ndim != 1:
        raise DimensionMismatchError("conseEmbed takes a single feature vector")
    return conseEmbedBatch(x, clf, seen, T)[0]

#------------------------------------------------------------------------------------------------------------
def rankByCosine(vectors, unseen):
    """Ranks the unseen classes for each row of `vectors` by cosine similarity (descending, ties to the
    lowest index). Returns an (N x U) array of class indices.

    """
    vectors=np.asarray(vectors, dtype = float)
    if vectors.ndim == 1:
        vectors=vectors.reshape(1, -1)
    if vectors.shape[1] != unseen.dim:
        raise DimensionMismatchError("embedding has dimension %d but unseen embeddings have dimension %d"
                                     % (vectors.shape[1], unseen.dim))
    norms=np.linalg.norm(vectors, axis = 1)
    if np.any(norms < 1e-12):
        raise ZeroVectorError("combined semantic embedding is the zero vector")
    unseenNorms=np.linalg.norm(unseen.vectors, axis = 1)
    if np.any(unseenNorms < 1e-12):
        i=int(np.where(unseenNorms < 1e-12)[0][0])
        raise ZeroVectorError("unseen embedding for class '%s' is the zero vector" % (unseen.classIds[i]),
                              classId = unseen.classIds[i])
    cosines=np.dot(vectors/norms[:, np.newaxis], (unseen.vectors/unseenNorms[:, np.newaxis]).T)
    return np.argsort(-cosines, axis = 1, kind = 'stable')

#------------------------------------------------------------------------------------------------------------
def conseRankBatch(features, clf, seen, unseen, T, k):
    """Returns the (N x k) array of top-k unseen class indices for each row of `features`.

    """
    if k < 1 or k > unseen.numClasses:
        raise KTooLargeError("k = %d must be in the range [1, %d]" % (k, unseen.numClasses))
    if seen.dim != unseen.dim:
        raise DimensionMismatchError("seen and unseen embeddings have different dimensions")
    return rankByCosine(conseEmbedBatch(features, clf, seen, T), unseen)[:, :k]

#------------------------------------------------------------------------------------------------------------
def consePredict(x, clf, seen, unseen, T, k):
    """Ranks unseen classes for x by cosine similarity between their embeddings and the ConSE embedding
    of x.

    Returns:
        List of the top-k unseen class ids.

    """
    x=np.asarray(x, dtype = float)
    if x.ndim != 1:
        raise DimensionMismatchError("consePredict takes a single feature vector")
    return [unseen.classIds[i] for i in conseRankBatch(x, clf, seen, unseen, T, k)[0]]
