"""

This module contains routines for adapting the semantic side of the model: learning the phantom class
embeddings b_r = sum_c beta_rc a_c (as sparse combinations of the seen-class embeddings), and learning a
diagonal Mahalanobis metric. Both alternate between updating the base classifiers V (with the training
module) and updating the semantic parameters with V held fixed.

"""

import warnings
import numpy as np
from scipy.cluster.vq import kmeans2
from .errors import *
from .semantics import EmbeddingTable, DiagonalMetric, ScaledIdentityMetric, similarityArray
from .training import makeLoss, objectiveParts, minimize, trainBaseClassifiers
from .synthesis import BaseClassifierSet

INIT_STRATEGIES=['identity', 'randomSubset', 'kmeans', 'mixed', 'auto']

#------------------------------------------------------------------------------------------------------------
class BetaMatrix(object):
    """Coefficients beta (R x S) expressing each phantom embedding as a combination of seen-class
    embeddings.

    Attributes:
        coeffs (:obj:`np.ndarray`): Read-only (R x S) array.
        objectiveHistory (:obj:`list`): Full phantom objective after each outer round of learning (empty if
            the matrix was not learned).

    """

    def __init__(self, coeffs, objectiveHistory = None):
        coeffs=np.array(coeffs, dtype = float)
        if coeffs.ndim != 2 or coeffs.shape[0] < 1 or coeffs.shape[1] < 1:
            raise ShapeMismatchError("beta must be a non-empty 2d array")
        if np.all(np.isfinite(coeffs)) == False:
            raise NonFiniteError("beta contains NaN or Inf values")
        coeffs.setflags(write = False)
        self.coeffs=coeffs
        if objectiveHistory is None:
            objectiveHistory=[]
        self.objectiveHistory=objectiveHistory


    @property
    def numPhantoms(self):
        return self.coeffs.shape[0]


    @property
    def numSeen(self):
        return self.coeffs.shape[1]

#------------------------------------------------------------------------------------------------------------
class PhantomConfig(object):
    """Settings for learning phantom embeddings.

    Args:
        eta (:obj:`float`, optional): Weight of the l1 penalty on beta (>= 0).
        gamma (:obj:`float`, optional): Weight of the penalty on phantom norms straying from h (>= 0).
        h (:obj:`float`, optional): Target phantom norm (> 0).
        outerRounds (:obj:`int`, optional): Number of V-steps; each one after the first is preceded by a
            beta-step.
        init (:obj:`str`, optional): Initialization strategy (see :func:`initPhantoms`).
        numPhantoms (:obj:`int`, optional): R. If None, R = number of seen classes.

    """

    def __init__(self, eta = 0.0, gamma = 0.0, h = 1.0, outerRounds = 1, init = 'identity', numPhantoms = None):
        if eta < 0 or gamma < 0:
            raise InvalidSpecError("eta and gamma must be >= 0")
        if h <= 0:
            raise InvalidSpecError("h must be > 0")
        if outerRounds < 1:
            raise InvalidSpecError("outerRounds must be >= 1")
        if init not in INIT_STRATEGIES:
            raise InvalidSpecError("unknown phantom initialization '%s' - valid values are %s" % (init, INIT_STRATEGIES))
        if numPhantoms is not None and numPhantoms < 1:
            raise InvalidSpecError("numPhantoms must be >= 1")
        self.eta=float(eta)
        self.gamma=float(gamma)
        self.h=float(h)
        self.outerRounds=int(outerRounds)
        self.init=init
        self.numPhantoms=numPhantoms

#------------------------------------------------------------------------------------------------------------
class MetricLearnConfig(object):
    """Settings for learning a diagonal metric.

    Args:
        gammaM (:obj:`float`, optional): Weight of the (gammaM/2)||diag(m) - sigma0 I||_F^2 penalty.
        sigma0 (:obj:`float`, optional): Starting (and anchoring) value of the diagonal of M.
        folds (:obj:`int`, optional): Number of sample-wise folds (>= 2). V is fit on the first
            folds-1 folds and M on the last folds-1 folds.
        outerRounds (:obj:`int`, optional): Number of (M-step, V-step) rounds after the initial V fit.

    """

    def __init__(self, gammaM = 1.0, sigma0 = 1.0, folds = 5, outerRounds = 2):
        if gammaM < 0:
            raise InvalidSpecError("gammaM must be >= 0")
        if sigma0 <= 0:
            raise InvalidSpecError("sigma0 must be > 0")
        if folds < 2:
            raise InvalidFoldsError("metric learning needs folds >= 2")
        if outerRounds < 0:
            raise InvalidSpecError("outerRounds must be >= 0")
        self.gammaM=float(gammaM)
        self.sigma0=float(sigma0)
        self.folds=int(folds)
        self.outerRounds=int(outerRounds)

#------------------------------------------------------------------------------------------------------------
def _coeffsArray(beta):
    if isinstance(beta, BetaMatrix):
        return beta.coeffs
    return np.asarray(beta, dtype = float)

#------------------------------------------------------------------------------------------------------------
def phantomEmbeddingsFromBeta(beta, seen):
    """Returns the phantom embeddings b_r = sum_c beta_rc a_c, as an (unnormalized) EmbeddingTable with
    class ids 'phantom0', 'phantom1', ...

    """
    coeffs=_coeffsArray(beta)
    if coeffs.ndim != 2 or coeffs.shape[1] != seen.numClasses:
        raise ShapeMismatchError("beta has shape %s but there are %d seen classes" % (str(coeffs.shape), seen.numClasses))
    return EmbeddingTable(["phantom%d" % (r) for r in range(coeffs.shape[0])], np.dot(coeffs, seen.vectors))

#------------------------------------------------------------------------------------------------------------
def softThreshold(x, tau):
    """Proximal operator of tau*||x||_1.

    """
    return np.sign(x)*np.maximum(abs(x)-tau, 0)

#------------------------------------------------------------------------------------------------------------
def _distanceBackprop(S, GS):
    # Gradient of the objective with respect to the distances feeding the row-wise softmax
    return -S*(GS-np.sum(S*GS, axis = 1, keepdims = True))

#------------------------------------------------------------------------------------------------------------
def _phantomSmoothParts(coeffs, V, data, A, metric, lam, gamma, h, loss):
    B=np.dot(coeffs, A)
    S=similarityArray(A, B, metric)
    value, GV, GW=objectiveParts(V, data, S, loss, lam)
    GD=_distanceBackprop(S, np.dot(GW, V.T))
    dimWeights=metric.dimensionWeights(A.shape[1])
    GB=-2*dimWeights*(np.dot(GD.T, A)-GD.sum(axis = 0)[:, np.newaxis]*B)
    normExcess=np.sum(B*B, axis = 1)-h*h
    value=value+0.5*gamma*float(np.sum(normExcess**2))
    GB=GB+2*gamma*normExcess[:, np.newaxis]*B
    return value, np.dot(GB, A.T)

#------------------------------------------------------------------------------------------------------------
def _checkPhantomShapes(V, coeffs, data, seen):
    if coeffs.ndim != 2 or coeffs.shape[1] != seen.numClasses:
        raise ShapeMismatchError("beta has shape %s but there are %d seen classes" % (str(coeffs.shape), seen.numClasses))
    if seen.numClasses != data.numClasses:
        raise ShapeMismatchError("seen embeddings have %d classes but data has %d" % (seen.numClasses, data.numClasses))
    if V.ndim != 2 or V.shape[0] != coeffs.shape[0] or V.shape[1] != data.featureDim:
        raise ShapeMismatchError("base classifiers have shape %s, expected (%d, %d)"
                                 % (str(V.shape), coeffs.shape[0], data.featureDim))

#------------------------------------------------------------------------------------------------------------
def phantomObjective(bases, beta, data, seen, metric, lam, eta, gamma, h, loss = 'ovo'):
    """Full phantom-learning objective: the training objective with similarity weights computed from the
    phantom embeddings b_r = sum_c beta_rc a_c, plus eta sum |beta_rc| and (gamma/2) sum_r (||b_r||^2 - h^2)^2.

    Args:
        bases (:obj:`BaseClassifierSet` or :obj:`np.ndarray`): Base classifiers (R x D).
        beta (:obj:`BetaMatrix` or :obj:`np.ndarray`): Coefficients (R x S).
        data (:obj:`LabeledDataset`): Seen-class training data.
        seen (:obj:`EmbeddingTable`): Seen-class embeddings (S x d).
        metric (:obj:`Metric`): Metric used for the similarity weights.
        lam (:obj:`float`): Regularization weight on the synthesized classifiers.
        eta (:obj:`float`): l1 weight.
        gamma (:obj:`float`): Norm penalty weight.
        h (:obj:`float`): Target phantom norm.
        loss (:obj:`Loss` or :obj:`str`, optional): Training loss.

    Returns:
        Objective value.

    """
    V=bases.vectors if isinstance(bases, BaseClassifierSet) else np.asarray(bases, dtype = float)
    coeffs=_coeffsArray(beta)
    _checkPhantomShapes(V, coeffs, data, seen)
    value, grad=_phantomSmoothParts(coeffs, V, data, seen.vectors, metric, lam, gamma, h,
                                    makeLoss(loss, seenEmbeddings = seen))
    return value+eta*float(np.sum(abs(coeffs)))

#------------------------------------------------------------------------------------------------------------
def phantomGradient(bases, beta, data, seen, metric, lam, gamma, h, loss = 'ovo'):
    """Gradient with respect to beta of the smooth part of :func:`phantomObjective` (everything except
    the l1 term).

    """
    V=bases.vectors if isinstance(bases, BaseClassifierSet) else np.asarray(bases, dtype = float)
    coeffs=_coeffsArray(beta)
    _checkPhantomShapes(V, coeffs, data, seen)
    return _phantomSmoothParts(coeffs, V, data, seen.vectors, metric, lam, gamma, h,
                               makeLoss(loss, seenEmbeddings = seen))[1]

#------------------------------------------------------------------------------------------------------------
def betaStep(bases, beta, data, seen, metric, lam, eta, gamma, h, config, loss = 'ovo', verbose = False):
    """Minimizes the phantom objective over beta with V held fixed, using proximal gradient descent
    (soft-thresholding for the l1 term) with a backtracking line search.

    Args:
        config (:obj:`TrainConfig`): Solver settings (maxIters, gradTol, initialStep, shrink, minStep).
            Convergence is declared when the norm of the proximal gradient step falls below gradTol.

    Returns:
        The updated coefficients (:obj:`np.ndarray`) and a dictionary with keys 'iterations',
        'objective', 'converged', 'stopReason'.

    """
    V=bases.vectors if isinstance(bases, BaseClassifierSet) else np.asarray(bases, dtype = float)
    coeffs=np.array(_coeffsArray(beta), dtype = float)
    _checkPhantomShapes(V, coeffs, data, seen)
    loss=makeLoss(loss, seenEmbeddings = seen)
    A=seen.vectors

    def smooth(c):
        return _phantomSmoothParts(c, V, data, A, metric, lam, gamma, h, loss)

    f, g=smooth(coeffs)
    if np.isfinite(f) == False or np.all(np.isfinite(g)) == False:
        raise NonFiniteError("phantom objective is not finite at the starting beta")
    t=config.initialStep
    converged=False
    stopReason='maxIters'
    iterations=0
    while iterations < config.maxIters:
        accepted=False
        sawFinite=False
        while t >= config.minStep:
            candidate=softThreshold(coeffs-t*g, t*eta)
            fNew, gNew=smooth(candidate)
            diff=candidate-coeffs
            if np.isfinite(fNew) and np.all(np.isfinite(gNew)):
                sawFinite=True
                if fNew <= f+float(np.sum(g*diff))+float(np.sum(diff*diff))/(2*t):
                    accepted=True
                    break
            t=t*config.shrink
        if accepted == False:
            if sawFinite == False:
                raise NonFiniteError("phantom objective became non-finite at every trial step")
            stopReason='lineSearch'
            break
        residual=float(np.linalg.norm(diff))/t
        coeffs, f, g=candidate, fNew, gNew
        iterations=iterations+1
        if residual <= config.gradTol:
            converged=True
            stopReason='gradTol'
            break
        t=t/config.shrink
    objective=f+eta*float(np.sum(abs(coeffs)))
    if verbose == True:
        print("... beta-step: stopped after %d iterations (%s), objective = %.6e" % (iterations, stopReason, objective))

    return coeffs, {'iterations': iterations, 'objective': objective, 'converged': converged,
                    'stopReason': stopReason}

#------------------------------------------------------------------------------------------------------------
def learnPhantomEmbeddings(data, seen, config, trainConfig, lam = None, metric = None, loss = 'ovo',
                           initialBeta = None, seed = 0, verbose = False):
    """Learns base classifiers and phantom embeddings by alternating optimization. The first round is a
    V-step at the initial beta; each later round is a beta-step followed by a V-step (warm-started from
    the previous V). With outerRounds = 1, this is plain training with the initial phantoms.

    Args:
        data (:obj:`LabeledDataset`): Seen-class training data.
        seen (:obj:`EmbeddingTable`): Seen-class embeddings.
        config (:obj:`PhantomConfig`): eta, gamma, h, number of rounds, initialization, R.
        trainConfig (:obj:`TrainConfig`): Solver settings (used for both V- and beta-steps).
        lam (:obj:`float`, optional): Regularization weight (default: trainConfig.lam).
        metric (:obj:`Metric`, optional): Metric for the similarity weights (default: sigma = 1).
        loss (:obj:`Loss` or :obj:`str`, optional): Training loss.
        initialBeta (:obj:`BetaMatrix` or :obj:`np.ndarray`, optional): Overrides the initialization
            strategy.
        seed (:obj:`int` or :obj:`np.random.Generator`, optional): Seed for randomized initializations.
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        A :obj:`BaseClassifierSet` and a :obj:`BetaMatrix` (whose objectiveHistory holds the full
        objective after each round).

    """
    if lam is None:
        lam=trainConfig.lam
    if metric is None:
        metric=ScaledIdentityMetric(1.0)
    if seen.numClasses != data.numClasses:
        raise ShapeMismatchError("seen embeddings have %d classes but data has %d" % (seen.numClasses, data.numClasses))
    loss=makeLoss(loss, seenEmbeddings = seen)
    trainCfg=trainConfig.copy(lam = lam)
    if initialBeta is None:
        R=config.numPhantoms if config.numPhantoms is not None else seen.numClasses
        coeffs=initPhantoms(config.init, seen, R, seed).coeffs
    else:
        coeffs=_coeffsArray(initialBeta)
    coeffs=np.array(coeffs, dtype = float)
    A=seen.vectors

    def vStep(c, V0):
        return trainBaseClassifiers(data, similarityArray(A, np.dot(c, A), metric), loss, trainCfg,
                                    initial = V0, verbose = verbose)

    def fullObjective(c, V):
        return phantomObjective(V, c, data, seen, metric, lam, config.eta, config.gamma, config.h, loss = loss)

    if verbose == True:
        print(">>> Learning phantom embeddings (R = %d, %d rounds)" % (coeffs.shape[0], config.outerRounds))
    bases=vStep(coeffs, None)
    history=[fullObjective(coeffs, bases.vectors)]
    for roundNum in range(1, config.outerRounds):
        coeffs, info=betaStep(bases, coeffs, data, seen, metric, lam, config.eta, config.gamma, config.h,
                              trainCfg, loss = loss, verbose = verbose)
        bases=vStep(coeffs, bases.vectors)
        history.append(fullObjective(coeffs, bases.vectors))
        if verbose == True:
            print("... round %d: objective = %.6e" % (roundNum+1, history[-1]))

    return bases, BetaMatrix(coeffs, objectiveHistory = history)

#------------------------------------------------------------------------------------------------------------
def _asGenerator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)

#------------------------------------------------------------------------------------------------------------
def _fillEmptyClusters(X, assign, numClusters):
    # Move the point furthest from its cluster mean (among clusters with > 1 member) into each empty cluster
    assign=assign.copy()
    for r in range(numClusters):
        if np.sum(assign == r) > 0:
            continue
        counts=np.bincount(assign, minlength = numClusters)
        bestDist, bestIndex=-1.0, None
        for i in range(X.shape[0]):
            if counts[assign[i]] < 2:
                continue
            centre=X[assign == assign[i]].mean(axis = 0)
            dist=float(np.sum((X[i]-centre)**2))
            if dist > bestDist:
                bestDist, bestIndex=dist, i
        assign[bestIndex]=r
    return assign

#------------------------------------------------------------------------------------------------------------
def initPhantoms(strategy, seen, R, seed = 0):
    """Initial beta coefficients for R phantom classes.

    Strategies:
        * 'identity': b_r = a_r (requires R = S).
        * 'randomSubset': b_r are R distinct seen embeddings, picked at random (R <= S).
        * 'kmeans': b_r are the l2-normalized centroids of a k-means clustering of the seen embeddings
          (R <= S); each beta row is the cluster membership average, rescaled by the centroid norm.
        * 'mixed': the first S rows are the identity, the rest random convex combinations of the seen
          embeddings, rescaled to unit norm (R >= S).
        * 'auto': 'kmeans' if R < S, 'identity' if R = S, 'mixed' if R > S.

    Args:
        strategy (:obj:`str`): One of the above.
        seen (:obj:`EmbeddingTable`): Seen-class embeddings.
        R (:obj:`int`): Number of phantom classes.
        seed (:obj:`int` or :obj:`np.random.Generator`, optional): Seed for the random strategies.

    Returns:
        A :obj:`BetaMatrix`.

    """
    S=seen.numClasses
    A=seen.vectors
    if int(R) != R or R < 1:
        raise IncompatibleStrategyError("number of phantoms must be an integer >= 1 (got %s)" % (str(R)))
    R=int(R)
    if strategy == 'auto':
        if R < S:
            strategy='kmeans'
        elif R == S:
            strategy='identity'
        else:
            strategy='mixed'

    if strategy == 'identity':
        if R != S:
            raise IncompatibleStrategyError("identity initialization needs R = S (R = %d, S = %d)" % (R, S))
        return BetaMatrix(np.eye(S))

    elif strategy == 'randomSubset':
        if R > S:
            raise IncompatibleStrategyError("randomSubset initialization needs R <= S (R = %d, S = %d)" % (R, S))
        rng=_asGenerator(seed)
        picks=rng.choice(S, size = R, replace = False)
        coeffs=np.zeros((R, S))
        coeffs[np.arange(R), picks]=1.0
        return BetaMatrix(coeffs)

    elif strategy == 'kmeans':
        if R > S:
            raise IncompatibleStrategyError("kmeans initialization needs R <= S (R = %d, S = %d)" % (R, S))
        rng=_asGenerator(seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            centroids, assign=kmeans2(A, R, minit = '++', seed = rng)
        assign=_fillEmptyClusters(A, np.asarray(assign), R)
        coeffs=np.zeros((R, S))
        for r in range(R):
            members=assign == r
            coeffs[r, members]=1.0/members.sum()
        norms=np.linalg.norm(np.dot(coeffs, A), axis = 1)
        for r in range(R):
            if norms[r] >= 1e-12:
                coeffs[r]=coeffs[r]/norms[r]
        return BetaMatrix(coeffs)

    elif strategy == 'mixed':
        if R < S:
            raise IncompatibleStrategyError("mixed initialization needs R >= S (R = %d, S = %d)" % (R, S))
        rng=_asGenerator(seed)
        extra=rng.dirichlet(np.ones(S), size = R-S)
        norms=np.linalg.norm(np.dot(extra, A), axis = 1)
        norms[norms < 1e-12]=1.0
        return BetaMatrix(np.concatenate([np.eye(S), extra/norms[:, np.newaxis]]))

    raise IncompatibleStrategyError("unknown phantom initialization '%s' - valid values are %s" % (strategy, INIT_STRATEGIES))

#------------------------------------------------------------------------------------------------------------
def _metricParts(m, V, data, A, B, lam, gammaM, sigma0, loss):
    m=np.asarray(m, dtype = float)
    value=0.5*gammaM*float(np.sum((m-sigma0)**2))
    grad=gammaM*(m-sigma0)
    if data is None:
        return value+0.5*lam*float(np.sum(V*V)), grad
    S=similarityArray(A, B, DiagonalMetric(m))
    dataValue, GV, GW=objectiveParts(V, data, S, loss, lam, regularize = 'bases')
    GD=_distanceBackprop(S, np.dot(GW, V.T))
    Q=np.dot(GD.sum(axis = 1), A*A)-2*np.sum(np.dot(GD.T, A)*B, axis = 0)+np.dot(GD.sum(axis = 0), B*B)
    return value+dataValue, grad+2*m*Q

#------------------------------------------------------------------------------------------------------------
def _checkMetricShapes(m, V, data, seen, phantom):
    if m.ndim != 1 or m.shape[0] != seen.dim:
        raise ShapeMismatchError("metric diagonal has shape %s but embeddings have dimension %d" % (str(m.shape), seen.dim))
    if phantom.dim != seen.dim:
        raise DimensionMismatchError("seen and phantom embeddings have different dimensions")
    if V.ndim != 2 or V.shape[0] != phantom.numClasses:
        raise ShapeMismatchError("need one base classifier per phantom class")
    if data is not None and (data.numClasses != seen.numClasses or data.featureDim != V.shape[1]):
        raise ShapeMismatchError("data does not match the seen classes / base classifier dimension")

#------------------------------------------------------------------------------------------------------------
def metricObjective(m, bases, data, seen, phantom, lam, gammaM, sigma0, loss = 'ovo'):
    """Metric-learning objective: the training data term with similarity weights computed through
    DiagonalMetric(m), plus (lam/2) sum_r ||v_r||^2 and (gammaM/2) ||diag(m) - sigma0 I||_F^2. Note that
    here the base classifiers (not the synthesized ones) are regularized.

    Args:
        m (:obj:`np.ndarray`): Metric diagonal (length d).
        bases (:obj:`BaseClassifierSet` or :obj:`np.ndarray`): Base classifiers (R x D).
        data (:obj:`LabeledDataset` or None): Seen-class data. If None, the data term is omitted.
        seen (:obj:`EmbeddingTable`): Seen-class embeddings.
        phantom (:obj:`EmbeddingTable`): Phantom embeddings.
        lam (:obj:`float`): Regularization weight.
        gammaM (:obj:`float`): Weight of the penalty anchoring M to sigma0 I.
        sigma0 (:obj:`float`): Anchor value.
        loss (:obj:`Loss` or :obj:`str`, optional): Training loss.

    Returns:
        Objective value.

    """
    m=np.asarray(m, dtype = float)
    V=bases.vectors if isinstance(bases, BaseClassifierSet) else np.asarray(bases, dtype = float)
    _checkMetricShapes(m, V, data, seen, phantom)
    return _metricParts(m, V, data, seen.vectors, phantom.vectors, lam, gammaM, sigma0,
                        makeLoss(loss, seenEmbeddings = seen))[0]

#------------------------------------------------------------------------------------------------------------
def metricGradient(m, bases, data, seen, phantom, lam, gammaM, sigma0, loss = 'ovo'):
    """Gradient of :func:`metricObjective` with respect to m.

    """
    m=np.asarray(m, dtype = float)
    V=bases.vectors if isinstance(bases, BaseClassifierSet) else np.asarray(bases, dtype = float)
    _checkMetricShapes(m, V, data, seen, phantom)
    return _metricParts(m, V, data, seen.vectors, phantom.vectors, lam, gammaM, sigma0,
                        makeLoss(loss, seenEmbeddings = seen))[1]

#------------------------------------------------------------------------------------------------------------
def metricStep(m, bases, data, seen, phantom, lam, gammaM, sigma0, config, loss = 'ovo', verbose = False):
    """Minimizes :func:`metricObjective` over m with V held fixed (gradient descent with line search).

    Returns:
        The new diagonal (:obj:`np.ndarray`) and the solver report (see :func:`training.minimize`).

    """
    m=np.array(m, dtype = float)
    V=bases.vectors if isinstance(bases, BaseClassifierSet) else np.asarray(bases, dtype = float)
    _checkMetricShapes(m, V, data, seen, phantom)
    loss=makeLoss(loss, seenEmbeddings = seen)

    def func(mm):
        return _metricParts(mm, V, data, seen.vectors, phantom.vectors, lam, gammaM, sigma0, loss)

    return minimize(func, m, config, verbose = verbose, label = "metric objective")

#------------------------------------------------------------------------------------------------------------
def learnMetric(data, seen, phantom, config, trainConfig, lam = None, loss = 'ovo', seed = 0, verbose = False):
    """Learns a diagonal metric and base classifiers by alternating optimization on overlapping
    sample-wise folds: V is fit on the first (folds-1) folds, M on the last (folds-1) folds.

    Starts from M = sigma0 I and fits V; then each outer round is an M-step followed by a V-step
    (warm-started).

    Args:
        data (:obj:`LabeledDataset`): Seen-class training data.
        seen (:obj:`EmbeddingTable`): Seen-class embeddings.
        phantom (:obj:`EmbeddingTable`): Phantom embeddings (one per seen class).
        config (:obj:`MetricLearnConfig`): gammaM, sigma0, folds, rounds.
        trainConfig (:obj:`TrainConfig`): Solver settings.
        lam (:obj:`float`, optional): Regularization weight on V (default: trainConfig.lam).
        loss (:obj:`Loss` or :obj:`str`, optional): Training loss.
        seed (:obj:`int` or :obj:`np.random.Generator`, optional): Seed for the fold split.
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        The learned :obj:`DiagonalMetric` and the final :obj:`BaseClassifierSet`. The latter's
        trainInfo['metricSteps'] lists (objective before, objective after) for each M-step.

    """
    from . import tuning

    if phantom.numClasses != seen.numClasses:
        raise IncompatibleStrategyError("metric learning needs one phantom per seen class (R = S)")
    if seen.numClasses != data.numClasses:
        raise ShapeMismatchError("seen embeddings have %d classes but data has %d" % (seen.numClasses, data.numClasses))
    if lam is None:
        lam=trainConfig.lam
    loss=makeLoss(loss, seenEmbeddings = seen)
    trainCfg=trainConfig.copy(lam = lam)
    A=seen.vectors
    B=phantom.vectors

    k=config.folds
    plan=tuning.makeFolds(data.labels, k, 'sampleWise', seed)
    vData=data.subset(np.sort(np.concatenate([plan.folds[i][1] for i in range(0, k-1)])))
    mData=data.subset(np.sort(np.concatenate([plan.folds[i][1] for i in range(1, k)])))

    def vStep(m, V0):
        return trainBaseClassifiers(vData, similarityArray(A, B, DiagonalMetric(m)), loss, trainCfg,
                                    initial = V0, regularize = 'bases', verbose = verbose)

    if verbose == True:
        print(">>> Learning diagonal metric (%d rounds)" % (config.outerRounds))
    m=np.full(seen.dim, config.sigma0)
    bases=vStep(m, None)
    metricSteps=[]
    for roundNum in range(config.outerRounds):
        m, info=metricStep(m, bases, mData, seen, phantom, lam, config.gammaM, config.sigma0, trainCfg,
                           loss = loss, verbose = verbose)
        metricSteps.append((info['initialObjective'], info['objective']))
        bases=vStep(m, bases.vectors)
        if verbose == True:
            print("... round %d: M-step objective %.6e -> %.6e" % (roundNum+1, metricSteps[-1][0], metricSteps[-1][1]))
    bases.trainInfo['metricSteps']=metricSteps

    return DiagonalMetric(m), bases
