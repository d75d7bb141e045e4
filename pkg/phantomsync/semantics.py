"""

This module contains classes and functions for handling semantic embeddings (per-class attribute or word
vectors), the distance metrics defined on them, and the class-to-phantom similarity weights that drive
classifier synthesis.

All objects here are immutable once constructed, and all functions are pure, so they can be shared
between threads.

"""

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax
from .errors import *

#------------------------------------------------------------------------------------------------------------
class EmbeddingTable(object):
    """Per-class semantic vectors, in a fixed class order.

    Attributes:
        classIds (:obj:`list`): Class identifiers, in row order.
        vectors (:obj:`np.ndarray`): Read-only (numClasses x d) array of embedding vectors.
        normalized (:obj:`bool`): If True, every row has unit l2 norm.

    """

    def __init__(self, classIds, vectors, normalized = False):
        vectors=np.array(vectors, dtype = float)
        if vectors.ndim != 2:
            raise ShapeMismatchError("embedding vectors must be a 2d array (got %d dimensions)" % (vectors.ndim))
        if vectors.shape[1] < 1:
            raise ShapeMismatchError("embedding dimension must be >= 1")
        classIds=list(classIds)
        if len(classIds) != vectors.shape[0]:
            raise ShapeMismatchError("number of class ids (%d) does not match number of embedding rows (%d)"
                                     % (len(classIds), vectors.shape[0]))
        if len(set(classIds)) != len(classIds):
            raise DuplicateClassError("class ids in an embedding table must be unique")
        if np.all(np.isfinite(vectors)) == False:
            raise NonFiniteError("embedding vectors contain NaN or Inf values")
        if normalized == True:
            norms=np.linalg.norm(vectors, axis = 1)
            for i in range(len(norms)):
                if norms[i] < 1e-12:
                    raise ZeroVectorError("embedding for class '%s' is the zero vector" % (classIds[i]),
                                          classId = classIds[i])
                if abs(norms[i]-1) > 1e-9:
                    raise InvalidSpecError("table flagged as normalized but row for class '%s' has norm %.12f"
                                           % (classIds[i], norms[i]))
        vectors.setflags(write = False)
        self.classIds=classIds
        self.vectors=vectors
        self.normalized=normalized
        self._indexMap={c: i for i, c in enumerate(classIds)}


    @property
    def numClasses(self):
        return self.vectors.shape[0]


    @property
    def dim(self):
        return self.vectors.shape[1]


    def indexOf(self, classId):
        """Returns the row index of the given class.

        """
        if classId not in self._indexMap.keys():
            raise InvalidLabelError("class '%s' is not in the embedding table" % (str(classId)))
        return self._indexMap[classId]


    def subset(self, classIds):
        """Returns a new table containing only the given classes (in the given order).

        """
        indices=[self.indexOf(c) for c in classIds]
        return EmbeddingTable(classIds, self.vectors[indices], normalized = self.normalized)


    def take(self, indices):
        """Returns a new table containing the rows with the given indices (in the given order).

        """
        indices=list(indices)
        return EmbeddingTable([self.classIds[i] for i in indices], self.vectors[indices],
                              normalized = self.normalized)

#------------------------------------------------------------------------------------------------------------
class Metric(object):
    """Base class for the (diagonal) Mahalanobis metrics used to compare embeddings. The distance between
    a and b is sum_k weights[k]*(a[k]-b[k])**2.

    """

    dim=None

    def dimensionWeights(self, dim):
        raise NotImplementedError("dimensionWeights must be implemented by Metric subclasses")

#------------------------------------------------------------------------------------------------------------
class ScaledIdentityMetric(Metric):
    """Metric with Sigma = sigma^2 I, i.e., distance = ||a - b||^2 / sigma^2.

    Args:
        sigma (:obj:`float`): Bandwidth, must be > 0.

    """

    def __init__(self, sigma):
        sigma=float(sigma)
        if np.isfinite(sigma) == False or sigma <= 0:
            raise InvalidSpecError("ScaledIdentityMetric sigma must be a finite number > 0 (got %s)" % (str(sigma)))
        self.sigma=sigma


    def dimensionWeights(self, dim):
        return np.full(dim, 1.0/self.sigma**2)


    def __repr__(self):
        return "ScaledIdentityMetric(sigma = %g)" % (self.sigma)

#------------------------------------------------------------------------------------------------------------
class DiagonalMetric(Metric):
    """Metric with Sigma^-1 = M^T M, M = diag(m), i.e., distance = sum_k m_k^2 (a_k - b_k)^2.

    Args:
        m (:obj:`np.ndarray`): Diagonal of M (length d).

    """

    def __init__(self, m):
        m=np.array(m, dtype = float)
        if m.ndim != 1 or m.shape[0] < 1:
            raise ShapeMismatchError("DiagonalMetric m must be a non-empty 1d array")
        if np.all(np.isfinite(m)) == False:
            raise NonFiniteError("DiagonalMetric m contains NaN or Inf values")
        m.setflags(write = False)
        self.m=m
        self.dim=m.shape[0]


    def dimensionWeights(self, dim):
        if dim != self.dim:
            raise DimensionMismatchError("metric has dimension %d but vectors have dimension %d" % (self.dim, dim))
        return self.m**2


    def __repr__(self):
        return "DiagonalMetric(m = %s)" % (np.array2string(self.m, precision = 4))

#------------------------------------------------------------------------------------------------------------
class SimilarityMatrix(object):
    """Row-stochastic weights s_cr linking real classes (rows) to phantom classes (columns).

    Attributes:
        weights (:obj:`np.ndarray`): Read-only (C x R) array.
        rowClasses (:obj:`list`): Class identifiers of the rows.
        numPhantom (:obj:`int`): Number of phantom classes R.

    Note:
        Weights built by :func:`similarityWeights` are strictly positive: entries that would underflow
        are floored at the smallest normal double. Hand-built matrices only need to be non-negative.

    """

    def __init__(self, weights, rowClasses = None):
        weights=np.array(weights, dtype = float)
        if weights.ndim != 2 or weights.shape[1] < 1:
            raise ShapeMismatchError("similarity weights must be a 2d array with at least one column")
        if rowClasses is None:
            rowClasses=list(range(weights.shape[0]))
        rowClasses=list(rowClasses)
        if len(rowClasses) != weights.shape[0]:
            raise ShapeMismatchError("number of row classes does not match number of similarity rows")
        if np.all(np.isfinite(weights)) == False:
            raise NonFiniteError("similarity weights contain NaN or Inf values")
        if np.any(weights < 0):
            raise InvalidCoefficientsError("similarity weights must be non-negative")
        if np.any(abs(weights.sum(axis = 1)-1) > 1e-10):
            raise InvalidCoefficientsError("similarity weight rows must sum to 1")
        weights.setflags(write = False)
        self.weights=weights
        self.rowClasses=rowClasses
        self.numPhantom=weights.shape[1]


    @property
    def shape(self):
        return self.weights.shape

#------------------------------------------------------------------------------------------------------------
def normalizeEmbeddings(table):
    """Divides each row of the table by its l2 norm.

    Args:
        table (:obj:`EmbeddingTable`): Table to normalize.

    Returns:
        A new, normalized :obj:`EmbeddingTable`.

    Raises:
        ZeroVectorError: If any row has norm < 1e-12.

    """
    norms=np.linalg.norm(table.vectors, axis = 1)
    for i in range(table.numClasses):
        if norms[i] < 1e-12:
            raise ZeroVectorError("embedding for class '%s' is the zero vector" % (table.classIds[i]),
                                  classId = table.classIds[i])
    return EmbeddingTable(table.classIds, table.vectors/norms[:, np.newaxis], normalized = True)

#------------------------------------------------------------------------------------------------------------
def mahalanobisDistance(a, b, metric):
    """Returns (a-b)^T Sigma^-1 (a-b) for the given metric.

    Args:
        a (:obj:`np.ndarray`): Vector.
        b (:obj:`np.ndarray`): Vector, same length as `a`.
        metric (:obj:`Metric`): Metric to use.

    Returns:
        Non-negative float.

    """
    a=np.asarray(a, dtype = float)
    b=np.asarray(b, dtype = float)
    if a.ndim != 1 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise DimensionMismatchError("vectors of shape %s and %s cannot be compared" % (a.shape, b.shape))
    diff=a-b
    return float(np.sum(metric.dimensionWeights(a.shape[0])*diff*diff))

#------------------------------------------------------------------------------------------------------------
def pairwiseDistances(A, B, metric):
    """Returns the (rows of A) x (rows of B) matrix of metric distances.

    """
    A=np.asarray(A, dtype = float)
    B=np.asarray(B, dtype = float)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError("embeddings have dimensions %d and %d" % (A.shape[1], B.shape[1]))
    if isinstance(metric, ScaledIdentityMetric):
        return cdist(A, B, 'sqeuclidean')/metric.sigma**2
    scale=np.sqrt(metric.dimensionWeights(A.shape[1]))
    return cdist(A*scale, B*scale, 'sqeuclidean')

#------------------------------------------------------------------------------------------------------------
def similarityArray(A, B, metric):
    """As :func:`similarityWeights`, but operating on and returning plain arrays. Rows are computed
    independently (the softmax is max-shifted per row), so the result does not depend on how the rows are
    batched.

    """
    S=softmax(-pairwiseDistances(A, B, metric), axis = 1)
    # Floor at the smallest normal double so no weight underflows to zero.
    S=np.maximum(S, np.finfo(float).tiny)
    return S/S.sum(axis = 1, keepdims = True)

#------------------------------------------------------------------------------------------------------------
def similarityWeights(real, phantom, metric):
    """Computes similarity weights s_cr = exp(-d(a_c, b_r)) / sum_r' exp(-d(a_c, b_r')).

    Args:
        real (:obj:`EmbeddingTable`): Embeddings of the real classes (rows of the result).
        phantom (:obj:`EmbeddingTable`): Embeddings of the phantom classes (columns of the result).
        metric (:obj:`Metric`): Metric used for the distances.

    Returns:
        A :obj:`SimilarityMatrix`.

    """
    if real.dim != phantom.dim:
        raise DimensionMismatchError("real embeddings have dimension %d but phantom embeddings have dimension %d"
                                     % (real.dim, phantom.dim))
    return SimilarityMatrix(similarityArray(real.vectors, phantom.vectors, metric), rowClasses = real.classIds)

#------------------------------------------------------------------------------------------------------------
def blendSimilarities(mats, coeffs):
    """Convex combination of similarity matrices computed from different semantic sources.

    Args:
        mats (:obj:`list`): List of :obj:`SimilarityMatrix` objects, all with the same shape and row order.
        coeffs (:obj:`list`): Non-negative blending coefficients that sum to 1.

    Returns:
        A :obj:`SimilarityMatrix`. Rows are not renormalized (they already sum to 1).

    """
    if len(mats) == 0:
        raise ShapeMismatchError("need at least one similarity matrix to blend")
    if len(mats) != len(coeffs):
        raise InvalidCoefficientsError("got %d matrices but %d coefficients" % (len(mats), len(coeffs)))
    coeffs=np.asarray(coeffs, dtype = float)
    if np.any(coeffs < 0) or np.all(np.isfinite(coeffs)) == False:
        raise InvalidCoefficientsError("blending coefficients must be finite and non-negative")
    if abs(coeffs.sum()-1) > 1e-9:
        raise InvalidCoefficientsError("blending coefficients must sum to 1 (sum = %.12f)" % (coeffs.sum()))
    for mat in mats[1:]:
        if mat.shape != mats[0].shape or mat.rowClasses != mats[0].rowClasses:
            raise ShapeMismatchError("similarity matrices to blend must share shape and row order")
    blended=coeffs[0]*mats[0].weights
    for c, mat in zip(coeffs[1:], mats[1:]):
        blended=blended+c*mat.weights
    return SimilarityMatrix(blended, rowClasses = mats[0].rowClasses)
