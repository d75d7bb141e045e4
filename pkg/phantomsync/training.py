"""

This module contains routines for learning the base classifiers V from seen-class data, with the
similarity weights held fixed. Three losses are supported: one-vs-other squared hinge, Crammer-Singer,
and structured Crammer-Singer (margins scaled by distances between class embeddings).

All objectives are minimized with full-batch gradient descent and a backtracking (Armijo) line search,
starting from V = 0. Trial step lengths come from the Barzilai-Borwein formula, but only steps that pass
the sufficient decrease test are accepted, so the objective never increases between iterations.

"""

import numpy as np
from scipy.spatial.distance import cdist
from .errors import *
from .semantics import SimilarityMatrix
from .synthesis import BaseClassifierSet, ClassifierSet

#------------------------------------------------------------------------------------------------------------
class LabeledDataset(object):
    """Feature matrix plus integer labels (indices into an ordered list of classes).

    Attributes:
        features (:obj:`np.ndarray`): Read-only (N x D) array.
        labels (:obj:`np.ndarray`): Read-only length N integer array, values in [0, numClasses).
        classIds (:obj:`list`): Class identifiers that the labels index.

    """

    def __init__(self, features, labels, classIds = None):
        features=np.array(features, dtype = float)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ShapeMismatchError("features must be a 2d array with at least one row and column")
        if np.all(np.isfinite(features)) == False:
            raise NonFiniteError("features contain NaN or Inf values")
        labels=np.asarray(labels)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ShapeMismatchError("need one label per feature row (got %d labels for %d rows)"
                                     % (labels.size, features.shape[0]))
        if labels.dtype.kind not in 'iu':
            if labels.dtype.kind != 'f' or np.any(labels != np.round(labels)):
                raise InvalidLabelError("labels must be integer class indices")
        labels=np.array(labels, dtype = np.int64)
        if classIds is None:
            classIds=list(range(int(labels.max())+1))
        classIds=list(classIds)
        if labels.min() < 0 or labels.max() >= len(classIds):
            raise InvalidLabelError("labels must be in the range [0, %d)" % (len(classIds)))
        features.setflags(write = False)
        labels.setflags(write = False)
        self.features=features
        self.labels=labels
        self.classIds=classIds
        self._indicators=None


    @property
    def numSamples(self):
        return self.features.shape[0]


    @property
    def featureDim(self):
        return self.features.shape[1]


    @property
    def numClasses(self):
        return len(self.classIds)


    @property
    def indicators(self):
        """(N x numClasses) array with +1 where y_n = c and -1 elsewhere.

        """
        if self._indicators is None:
            Y=-np.ones((self.numSamples, self.numClasses))
            Y[np.arange(self.numSamples), self.labels]=1.0
            Y.setflags(write = False)
            self._indicators=Y
        return self._indicators


    def classCounts(self):
        return np.bincount(self.labels, minlength = self.numClasses)


    def subset(self, indices):
        """Returns a new dataset holding only the given samples (class list unchanged).

        """
        indices=np.asarray(indices, dtype = np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices], classIds = self.classIds)


    def selectClasses(self, classIndices):
        """Returns a new dataset holding only the samples of the given classes, relabelled so that
        label i refers to ``classIndices[i]``.

        """
        classIndices=list(classIndices)
        relabel=-np.ones(self.numClasses, dtype = np.int64)
        relabel[classIndices]=np.arange(len(classIndices))
        mask=relabel[self.labels] >= 0
        if mask.sum() == 0:
            raise ShapeMismatchError("no samples belong to the selected classes")
        return LabeledDataset(self.features[mask], relabel[self.labels[mask]],
                              classIds = [self.classIds[i] for i in classIndices])

#------------------------------------------------------------------------------------------------------------
class TrainConfig(object):
    """Settings for the gradient descent solver.

    Args:
        lam (:obj:`float`, optional): Regularization weight lambda (>= 0).
        maxIters (:obj:`int`, optional): Maximum number of accepted iterations.
        gradTol (:obj:`float`, optional): Stop when the gradient norm falls below this (> 0).
        initialStep (:obj:`float`, optional): First trial step length.
        shrink (:obj:`float`, optional): Backtracking factor applied to the step on rejection.
        armijo (:obj:`float`, optional): Sufficient decrease constant.
        minStep (:obj:`float`, optional): Give up the line search below this step length.
        seed (:obj:`int`, optional): Seed (the solver itself is deterministic; kept for reporting).

    """

    def __init__(self, lam = 1.0, maxIters = 1000, gradTol = 1e-6, initialStep = 1.0, shrink = 0.5,
                 armijo = 1e-4, minStep = 1e-20, seed = 0):
        if lam < 0:
            raise InvalidSpecError("lambda must be >= 0")
        if gradTol <= 0:
            raise InvalidSpecError("gradTol must be > 0")
        if maxIters < 0:
            raise InvalidSpecError("maxIters must be >= 0")
        if shrink <= 0 or shrink >= 1:
            raise InvalidSpecError("shrink must be in (0, 1)")
        if initialStep <= 0 or minStep <= 0:
            raise InvalidSpecError("step lengths must be > 0")
        self.lam=float(lam)
        self.maxIters=int(maxIters)
        self.gradTol=float(gradTol)
        self.initialStep=float(initialStep)
        self.shrink=float(shrink)
        self.armijo=float(armijo)
        self.minStep=float(minStep)
        self.seed=seed


    @classmethod
    def fromDict(cls, optionsDict, lam = 1.0, seed = 0):
        """Makes a TrainConfig from a config file's ``trainOptions`` section.

        """
        keys=['maxIters', 'gradTol', 'initialStep', 'shrink', 'armijo', 'minStep']
        kwargs={k: optionsDict[k] for k in keys if k in optionsDict.keys()}
        return cls(lam = lam, seed = seed, **kwargs)


    def copy(self, **kwargs):
        """Returns a copy, with any given attributes replaced.

        """
        params={'lam': self.lam, 'maxIters': self.maxIters, 'gradTol': self.gradTol,
                'initialStep': self.initialStep, 'shrink': self.shrink, 'armijo': self.armijo,
                'minStep': self.minStep, 'seed': self.seed}
        params.update(kwargs)
        return TrainConfig(**params)

#------------------------------------------------------------------------------------------------------------
class Loss(object):
    """Base class for the data terms of the training objectives. Subclasses implement
    :meth:`dataTerm`, which returns the summed loss and its (sub)gradient with respect to the
    classifiers W.

    """

    name=None

    def dataTerm(self, W, data):
        raise NotImplementedError("dataTerm must be implemented by Loss subclasses")


    def __repr__(self):
        return "%s()" % (self.__class__.__name__)

#------------------------------------------------------------------------------------------------------------
class OneVsOtherLoss(Loss):
    """Squared hinge loss, sum_c sum_n max(0, 1 - I_{y_n,c} w_c^T x_n)^2, with I = +1 if y_n = c and
    -1 otherwise.

    """

    name='ovo'

    def dataTerm(self, W, data):
        Y=data.indicators
        hinge=np.maximum(0, 1-Y*np.dot(data.features, W.T))
        return float(np.sum(hinge*hinge)), -2*np.dot((Y*hinge).T, data.features)

#------------------------------------------------------------------------------------------------------------
class CrammerSingerLoss(Loss):
    """Crammer-Singer multi-class hinge loss, sum_n max(0, max_{c != y_n} Delta(c, y_n) + w_c^T x_n -
    w_{y_n}^T x_n), with Delta = 1. The gradient is the subgradient given by the first (lowest index)
    maximizing class.

    """

    name='cs'

    def deltaMatrix(self, numClasses):
        return 1.0-np.eye(numClasses)


    def dataTerm(self, W, data):
        if W.shape[0] < 2:
            raise TooFewClassesError("Crammer-Singer loss needs at least 2 classes")
        scores=np.dot(data.features, W.T)
        delta=self.deltaMatrix(W.shape[0])
        rows=np.arange(data.numSamples)
        y=data.labels
        augmented=delta[:, y].T+scores
        augmented[rows, y]=-np.inf
        cMax=np.argmax(augmented, axis = 1)
        violation=augmented[rows, cMax]-scores[rows, y]
        active=violation > 0
        GW=np.zeros(W.shape)
        np.add.at(GW, cMax[active], data.features[active])
        np.add.at(GW, y[active], -data.features[active])
        return float(np.sum(violation[active])), GW

#------------------------------------------------------------------------------------------------------------
class StructuredCrammerSingerLoss(CrammerSingerLoss):
    """Crammer-Singer loss with margins Delta(c, y) = ||a_c - a_y||_2, from the seen-class embeddings.

    Args:
        seenEmbeddings (:obj:`EmbeddingTable`): One row per seen class, in label order.

    """

    name='struct'

    def __init__(self, seenEmbeddings):
        self.seenEmbeddings=seenEmbeddings
        self._delta=cdist(seenEmbeddings.vectors, seenEmbeddings.vectors, 'euclidean')


    def deltaMatrix(self, numClasses):
        if numClasses != self._delta.shape[0]:
            raise ShapeMismatchError("structured loss has embeddings for %d classes, but there are %d classes"
                                     % (self._delta.shape[0], numClasses))
        return self._delta

#------------------------------------------------------------------------------------------------------------
def makeLoss(name, seenEmbeddings = None):
    """Returns the loss object for the given name ('ovo', 'cs', or 'struct'). The structured loss needs
    the seen-class embeddings.

    """
    if isinstance(name, Loss):
        return name
    if name == 'ovo':
        return OneVsOtherLoss()
    elif name == 'cs':
        return CrammerSingerLoss()
    elif name == 'struct':
        if seenEmbeddings is None:
            raise ConfigError("the structured loss needs seen-class embeddings")
        return StructuredCrammerSingerLoss(seenEmbeddings)
    raise ConfigError("unknown loss '%s' - valid losses are 'ovo', 'cs', 'struct'" % (str(name)))

#------------------------------------------------------------------------------------------------------------
def _weightsArray(weights):
    if isinstance(weights, SimilarityMatrix):
        return weights.weights
    return np.asarray(weights, dtype = float)

#------------------------------------------------------------------------------------------------------------
def _basesArray(bases):
    if isinstance(bases, BaseClassifierSet):
        return bases.vectors
    return np.asarray(bases, dtype = float)

#------------------------------------------------------------------------------------------------------------
def _checkShapes(V, data, S):
    if S.ndim != 2 or S.shape[0] != data.numClasses:
        raise ShapeMismatchError("similarity matrix must have one row per seen class (%d), got shape %s"
                                 % (data.numClasses, str(S.shape)))
    if V.ndim != 2 or S.shape[1] != V.shape[0]:
        raise ShapeMismatchError("similarity matrix has %d phantom columns but there are %d base classifiers"
                                 % (S.shape[1], V.shape[0]))
    if V.shape[1] != data.featureDim:
        raise ShapeMismatchError("base classifiers have dimension %d but features have dimension %d"
                                 % (V.shape[1], data.featureDim))

#------------------------------------------------------------------------------------------------------------
def objectiveParts(V, data, S, loss, lam, regularize = 'classifiers'):
    """Evaluates a training objective and its gradients.

    Args:
        V (:obj:`np.ndarray`): (R x D) base classifiers.
        data (:obj:`LabeledDataset`): Training data.
        S (:obj:`np.ndarray`): (numClasses x R) similarity weights.
        loss (:obj:`Loss`): Loss object.
        lam (:obj:`float`): Regularization weight.
        regularize (:obj:`str`, optional): Either 'classifiers' ((lam/2) sum_c ||w_c||^2) or 'bases'
            ((lam/2) sum_r ||v_r||^2).

    Returns:
        Objective value, gradient with respect to V, and gradient with respect to W = SV (holding V
        fixed; this is what chains into the similarity weights).

    """
    W=np.dot(S, V)
    value, GW=loss.dataTerm(W, data)
    if regularize == 'classifiers':
        value=value+0.5*lam*float(np.sum(W*W))
        GW=GW+lam*W
        GV=np.dot(S.T, GW)
    elif regularize == 'bases':
        value=value+0.5*lam*float(np.sum(V*V))
        GV=np.dot(S.T, GW)+lam*V
    else:
        raise ConfigError("regularize must be 'classifiers' or 'bases'")
    return value, GV, GW

#------------------------------------------------------------------------------------------------------------
def ovoObjective(bases, data, weights, lam, regularize = 'classifiers'):
    """One-vs-other objective: squared hinge loss of the synthesized seen-class classifiers plus
    (lam/2) sum_c ||w_c||^2.

    Args:
        bases (:obj:`BaseClassifierSet` or :obj:`np.ndarray`): Base classifiers V.
        data (:obj:`LabeledDataset`): Seen-class training data.
        weights (:obj:`SimilarityMatrix` or :obj:`np.ndarray`): Seen-class similarity weights
            (one row per seen class).
        lam (:obj:`float`): Regularization weight.
        regularize (:obj:`str`, optional): 'classifiers' (default) or 'bases'.

    Returns:
        Objective value.

    """
    V=_basesArray(bases)
    S=_weightsArray(weights)
    _checkShapes(V, data, S)
    return objectiveParts(V, data, S, OneVsOtherLoss(), lam, regularize = regularize)[0]

#------------------------------------------------------------------------------------------------------------
def ovoGradient(bases, data, weights, lam, regularize = 'classifiers'):
    """Gradient of :func:`ovoObjective` with respect to V (an R x D array).

    """
    V=_basesArray(bases)
    S=_weightsArray(weights)
    _checkShapes(V, data, S)
    return objectiveParts(V, data, S, OneVsOtherLoss(), lam, regularize = regularize)[1]

#------------------------------------------------------------------------------------------------------------
def csLoss(scores, y, delta = None):
    """Crammer-Singer loss for one sample: max(0, max_{c != y} Delta(c, y) + scores[c] - scores[y]).

    Args:
        scores (:obj:`np.ndarray`): Decision values for the S classes (S >= 2).
        y (:obj:`int`): Index of the true class.
        delta (optional): None (Delta = 1), a function delta(c, y), or an (S x S) array indexed [c, y].

    Returns:
        Loss value (float).

    """
    scores=np.asarray(scores, dtype = float)
    if scores.ndim != 1 or scores.shape[0] < 2:
        raise TooFewClassesError("Crammer-Singer loss needs scores for at least 2 classes")
    if int(y) != y or y < 0 or y >= scores.shape[0]:
        raise InvalidLabelError("label %s is not a valid class index" % (str(y)))
    y=int(y)
    best=-np.inf
    for c in range(scores.shape[0]):
        if c == y:
            continue
        if delta is None:
            d=1.0
        elif callable(delta):
            d=delta(c, y)
        else:
            d=delta[c][y]
        best=max(best, d+scores[c]-scores[y])
    return max(0.0, float(best))

#------------------------------------------------------------------------------------------------------------
def csObjective(bases, data, weights, lam, loss = None):
    """Crammer-Singer objective (summed loss plus (lam/2) sum_c ||w_c||^2). The loss defaults to
    :class:`CrammerSingerLoss`; pass a :class:`StructuredCrammerSingerLoss` for the structured variant.

    """
    if loss is None:
        loss=CrammerSingerLoss()
    V=_basesArray(bases)
    S=_weightsArray(weights)
    _checkShapes(V, data, S)
    return objectiveParts(V, data, S, loss, lam)[0]

#------------------------------------------------------------------------------------------------------------
def csGradient(bases, data, weights, lam, loss = None):
    """Subgradient of :func:`csObjective` with respect to V (ties in the inner max go to the lowest class
    index).

    """
    if loss is None:
        loss=CrammerSingerLoss()
    V=_basesArray(bases)
    S=_weightsArray(weights)
    _checkShapes(V, data, S)
    return objectiveParts(V, data, S, loss, lam)[1]

#------------------------------------------------------------------------------------------------------------
def minimize(func, x0, config, verbose = False, label = "objective"):
    """Minimizes a function by gradient descent with backtracking line search.

    Args:
        func (callable): Takes an array shaped like `x0` and returns (value, gradient).
        x0 (:obj:`np.ndarray`): Starting point.
        config (:obj:`TrainConfig`): Solver settings.
        verbose (:obj:`bool`, optional): If True, print progress.
        label (:obj:`str`, optional): Name used in progress messages.

    Returns:
        The final point, and a dictionary with keys 'iterations', 'objective', 'initialObjective',
        'gradNorm', 'converged', 'stopReason' ('gradTol', 'maxIters', or 'lineSearch'), and 'history'
        (objective after each accepted iteration, starting with the initial value).

    Raises:
        NonFiniteError: If the objective is NaN/Inf at the start, or at every trial step.

    """
    x=np.array(x0, dtype = float)
    f, g=func(x)
    if np.isfinite(f) == False or np.all(np.isfinite(g)) == False:
        raise NonFiniteError("%s is not finite at the starting point" % (label))
    history=[f]
    step=config.initialStep
    converged=False
    stopReason='maxIters'
    iterations=0
    while True:
        gradNorm=float(np.linalg.norm(g))
        if gradNorm <= config.gradTol:
            converged=True
            stopReason='gradTol'
            break
        if iterations >= config.maxIters:
            break
        t=max(step, config.minStep)
        accepted=False
        sawFinite=False
        while t >= config.minStep:
            xNew=x-t*g
            fNew, gNew=func(xNew)
            if np.isfinite(fNew) and np.all(np.isfinite(gNew)):
                sawFinite=True
                if fNew <= f-config.armijo*t*gradNorm**2:
                    accepted=True
                    break
            t=t*config.shrink
        if accepted == False:
            if sawFinite == False:
                raise NonFiniteError("%s became non-finite at every trial step (iteration %d)" % (label, iterations))
            stopReason='lineSearch'
            break
        # Barzilai-Borwein step length for the next trial
        s=xNew-x
        dg=gNew-g
        sdg=float(np.sum(s*dg))
        if sdg > 0:
            step=min(float(np.sum(s*s))/sdg, 1e12)
        else:
            step=t/config.shrink
        x, f, g=xNew, fNew, gNew
        history.append(f)
        iterations=iterations+1
        if verbose == True and iterations % 100 == 0:
            print("... %s: iteration %d, value = %.6e, |gradient| = %.3e" % (label, iterations, f, gradNorm))

    if verbose == True:
        print("... %s: stopped after %d iterations (%s), value = %.6e, |gradient| = %.3e"
              % (label, iterations, stopReason, f, gradNorm))
    info={'iterations': iterations, 'objective': f, 'initialObjective': history[0], 'gradNorm': gradNorm,
          'converged': converged, 'stopReason': stopReason, 'history': history}

    return x, info

#------------------------------------------------------------------------------------------------------------
def trainBaseClassifiers(data, weights, loss, config, initial = None, regularize = 'classifiers',
                         verbose = False):
    """Learns base classifiers V with the similarity weights held fixed, starting from V = 0 (or from
    `initial`, for warm starts).

    Args:
        data (:obj:`LabeledDataset`): Seen-class training data.
        weights (:obj:`SimilarityMatrix` or :obj:`np.ndarray`): Seen-class similarity weights
            (numClasses x R).
        loss (:obj:`Loss` or :obj:`str`): Loss object, or one of 'ovo', 'cs'.
        config (:obj:`TrainConfig`): Regularization weight and solver settings.
        initial (:obj:`np.ndarray` or :obj:`BaseClassifierSet`, optional): Starting point.
        regularize (:obj:`str`, optional): 'classifiers' (default) or 'bases'.
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        A :obj:`BaseClassifierSet`, with the solver report in its `trainInfo` attribute.

    """
    loss=makeLoss(loss)
    S=_weightsArray(weights)
    if initial is None:
        V0=np.zeros((S.shape[1], data.featureDim))
    else:
        V0=np.array(_basesArray(initial), dtype = float)
    _checkShapes(V0, data, S)

    def func(V):
        value, GV, GW=objectiveParts(V, data, S, loss, config.lam, regularize = regularize)
        return value, GV

    V, info=minimize(func, V0, config, verbose = verbose, label = "%s objective" % (loss.name))
    info['loss']=loss.name
    info['lambda']=config.lam
    info['seed']=config.seed

    return BaseClassifierSet(V, trainInfo = info)

#------------------------------------------------------------------------------------------------------------
def trainIndependentClassifiers(data, config, verbose = False):
    """Trains one regularized squared-hinge (one-vs-other) classifier per class, independently of the
    others (no synthesis). Each minimizes sum_n max(0, 1 - I_{y_n,c} w_c^T x_n)^2 + (lam/2)||w_c||^2.

    Returns:
        A :obj:`ClassifierSet` over `data.classIds`.

    """
    X=data.features
    W=np.zeros((data.numClasses, data.featureDim))
    for c in range(data.numClasses):
        Y=data.indicators[:, c:c+1]

        def func(w):
            hinge=np.maximum(0, 1-Y*np.dot(X, w.T))
            return float(np.sum(hinge*hinge))+0.5*config.lam*float(np.sum(w*w)), -2*np.dot((Y*hinge).T, X)+config.lam*w

        w, info=minimize(func, np.zeros((1, data.featureDim)), config, verbose = verbose,
                         label = "class %s" % (str(data.classIds[c])))
        W[c]=w[0]

    return ClassifierSet(data.classIds, W)
