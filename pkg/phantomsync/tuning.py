"""

This module contains routines for hyperparameter selection by cross validation.

Folds can be class-wise (the classes in each validation fold are never seen in training, mimicking the
zero-shot setting) or sample-wise (stratified over classes). Tuning happens in stages: first (lambda,
sigma) with the phantoms fixed to the seen classes, then (eta, gamma) with (lambda, sigma) frozen. The
ConSE baseline's T can be tuned the same way.

"""

import itertools
import numpy as np
import astropy.table as atpy
from concurrent.futures import ThreadPoolExecutor
from .errors import *
from . import semantics, synthesis, training, adaptation, conse, evaluation
from .startUp import getNumThreads
from . import plotSettings
import pylab as plt

#------------------------------------------------------------------------------------------------------------
class FoldPlan(object):
    """A cross-validation split.

    Attributes:
        mode (:obj:`str`): 'classWise' or 'sampleWise'.
        folds (:obj:`list`): List of (train indices, validation indices) tuples of sorted integer arrays.
        seed: Seed used to make the split.

    """

    def __init__(self, mode, folds, seed = None, labels = None):
        if mode not in ['classWise', 'sampleWise']:
            raise InvalidFoldsError("fold mode must be 'classWise' or 'sampleWise' (got '%s')" % (mode))
        if len(folds) < 2:
            raise InvalidFoldsError("a fold plan needs at least 2 folds")
        self.mode=mode
        self.folds=[(np.sort(np.asarray(t, dtype = np.int64)), np.sort(np.asarray(v, dtype = np.int64))) for t, v in folds]
        self.seed=seed
        self.validate(labels)


    @property
    def numFolds(self):
        return len(self.folds)


    def validate(self, labels = None):
        """Checks that the validation sets are non-empty, disjoint, and cover all samples, and that each
        training set is the complement of its validation set. For class-wise plans (and if labels are
        given), also checks that no class appears in both the training and validation parts of a fold.

        """
        allValidation=np.concatenate([v for t, v in self.folds])
        numSamples=allValidation.shape[0]
        if np.array_equal(np.sort(allValidation), np.arange(numSamples)) == False:
            raise InvalidFoldsError("validation sets must be disjoint and cover all samples")
        for t, v in self.folds:
            if v.shape[0] == 0 or t.shape[0] == 0:
                raise InvalidFoldsError("every fold needs non-empty training and validation sets")
            if t.shape[0]+v.shape[0] != numSamples or np.intersect1d(t, v).shape[0] > 0:
                raise InvalidFoldsError("training set must be the complement of the validation set")
            if labels is not None and self.mode == 'classWise':
                labels=np.asarray(labels)
                if np.intersect1d(labels[t], labels[v]).shape[0] > 0:
                    raise InvalidFoldsError("class-wise fold has classes in both training and validation sets")

#------------------------------------------------------------------------------------------------------------
def makeFolds(labels, k, mode, seed):
    """Splits samples into k cross-validation folds.

    Args:
        labels (:obj:`np.ndarray`): Class label of each sample.
        k (:obj:`int`): Number of folds (>= 2).
        mode (:obj:`str`): 'classWise' partitions the classes into k near-equal groups (all samples of
            a class go to its group's validation fold); 'sampleWise' deals the samples of each class
            round-robin across folds (stratified).
        seed (:obj:`int` or :obj:`np.random.Generator`): Seed for the random permutation.

    Returns:
        A :obj:`FoldPlan`.

    """
    labels=np.asarray(labels)
    if int(k) != k or k < 2:
        raise InvalidFoldsError("need k >= 2 folds (got %s)" % (str(k)))
    k=int(k)
    rng=seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    foldOf=np.zeros(labels.shape[0], dtype = np.int64)
    classes=np.unique(labels)
    if mode == 'classWise':
        if classes.shape[0] < k:
            raise TooFewClassesError("class-wise CV with %d folds needs at least %d classes (have %d)"
                                     % (k, k, classes.shape[0]))
        groups=np.array_split(rng.permutation(classes), k)
        for i in range(k):
            foldOf[np.isin(labels, groups[i])]=i
    elif mode == 'sampleWise':
        if labels.shape[0] < k:
            raise InvalidFoldsError("sample-wise CV with %d folds needs at least %d samples" % (k, k))
        offset=0
        for c in classes:
            members=rng.permutation(np.where(labels == c)[0])
            foldOf[members]=(offset+np.arange(members.shape[0])) % k
            offset=offset+members.shape[0]
    else:
        raise InvalidFoldsError("fold mode must be 'classWise' or 'sampleWise' (got '%s')" % (mode))
    folds=[]
    for i in range(k):
        folds.append((np.where(foldOf != i)[0], np.where(foldOf == i)[0]))

    return FoldPlan(mode, folds, seed = seed if not isinstance(seed, np.random.Generator) else None,
                    labels = labels)

#------------------------------------------------------------------------------------------------------------
class HyperGrid(object):
    """Hyperparameter values to search over.

    Attributes:
        lambdaValues, sigmaValues, etaValues, gammaValues (:obj:`list`): Positive reals.
        conseTValues (:obj:`list`): Positive integers.

    """

    def __init__(self, lambdaValues = None, sigmaValues = None, etaValues = None, gammaValues = None,
                 conseTValues = None):
        self.lambdaValues=self._check(lambdaValues, 'lambdaValues')
        self.sigmaValues=self._check(sigmaValues, 'sigmaValues')
        self.etaValues=self._check(etaValues, 'etaValues')
        self.gammaValues=self._check(gammaValues, 'gammaValues')
        self.conseTValues=self._check(conseTValues, 'conseTValues')
        for T in self.conseTValues:
            if int(T) != T:
                raise InvalidSpecError("conseTValues must be integers")
        self.conseTValues=[int(T) for T in self.conseTValues]


    def _check(self, values, name):
        if values is None:
            return []
        values=[float(v) for v in values]
        for v in values:
            if np.isfinite(v) == False or v <= 0:
                raise InvalidSpecError("%s must be positive (got %s)" % (name, str(v)))
        return values


    @classmethod
    def default(cls):
        """Log-spaced default grids: lambda in 2^-10...2^4 (8 values), sigma in 2^-5...2^5 (8 values),
        eta and gamma in 10^-3...10^1 (5 values), T in {1, 2, 5, 10}.

        """
        return cls(lambdaValues = list(np.logspace(-10, 4, 8, base = 2.0)),
                   sigmaValues = list(np.logspace(-5, 5, 8, base = 2.0)),
                   etaValues = list(np.logspace(-3, 1, 5)),
                   gammaValues = list(np.logspace(-3, 1, 5)),
                   conseTValues = [1, 2, 5, 10])


    def cells(self, stage):
        """Returns the list of parameter dictionaries for the given stage, in grid order (the last
        parameter varies fastest).

        """
        if stage == 'lambdaSigma':
            names, lists=['lambda', 'sigma'], [self.lambdaValues, self.sigmaValues]
        elif stage == 'etaGamma':
            names, lists=['eta', 'gamma'], [self.etaValues, self.gammaValues]
        elif stage == 'conse':
            names, lists=['T'], [self.conseTValues]
        else:
            raise ConfigError("unknown CV stage '%s' - valid stages are 'lambdaSigma', 'etaGamma', 'conse'" % (stage))
        for n, l in zip(names, lists):
            if len(l) == 0:
                raise InvalidSpecError("grid for '%s' is empty but is needed for CV stage '%s'" % (n, stage))
        return [dict(zip(names, values)) for values in itertools.product(*lists)]

#------------------------------------------------------------------------------------------------------------
class CVResult(object):
    """Scores for every cell of a cross-validation grid.

    Attributes:
        stage (:obj:`str`): CV stage.
        cells (:obj:`list`): Parameter dictionaries, in grid order.
        foldScores (:obj:`np.ndarray`): (numCells x numFolds) validation per-class accuracies (-inf for
            failed cells).
        meanScores (:obj:`np.ndarray`): Mean over folds for each cell.
        failed (:obj:`list`): Error message for each failed cell, or None.
        bestIndex (:obj:`int`): Index of the best cell (first one, in grid order, if tied).
        best (:obj:`dict`): Parameters of the best cell.

    """

    def __init__(self, stage, cells, foldScores, failed):
        self.stage=stage
        self.cells=cells
        self.foldScores=np.asarray(foldScores, dtype = float)
        self.failed=failed
        self.meanScores=np.array([-np.inf if failed[i] is not None else float(np.mean(self.foldScores[i]))
                                  for i in range(len(cells))])
        if np.all(np.isneginf(self.meanScores)):
            raise CrossValidationError("all %d cells of the CV grid failed" % (len(cells)))
        self.bestIndex=int(np.argmax(self.meanScores))
        self.best=dict(cells[self.bestIndex])
        self.bestScore=float(self.meanScores[self.bestIndex])


    def toTable(self):
        """Returns the results as an astropy Table (one row per cell: parameters, per-fold scores, mean,
        failed flag).

        """
        from . import __version__
        tab=atpy.Table()
        for key in self.cells[0].keys():
            tab[key]=[cell[key] for cell in self.cells]
        for i in range(self.foldScores.shape[1]):
            tab['fold%d' % (i)]=self.foldScores[:, i]
        tab['mean']=self.meanScores
        tab['failed']=[f is not None for f in self.failed]
        tab.meta['STAGE']=self.stage
        tab.meta['SYNCVER']=__version__
        return tab


    def write(self, fileName):
        """Writes the results table (format guessed from the extension, e.g. .csv or .fits).

        """
        self.toTable().write(fileName, overwrite = True)

#------------------------------------------------------------------------------------------------------------
def _foldClasses(data, plan, foldIndex):
    trainIdx, valIdx=plan.folds[foldIndex]
    trainClasses=np.unique(data.labels[trainIdx])
    valClasses=np.unique(data.labels[valIdx])
    return trainIdx, valIdx, trainClasses, valClasses

#------------------------------------------------------------------------------------------------------------
def _validationData(data, valIdx, valClasses):
    return data.subset(valIdx).selectClasses(valClasses)

#------------------------------------------------------------------------------------------------------------
def scoreFold(data, seen, cell, plan, foldIndex, loss, stage, trainConfig, fixed = None, phantomConfig = None):
    """Trains on the training part of one fold with the given cell's hyperparameters and returns the
    per-class accuracy on the validation part. Validation samples are classified among the classes present
    in the validation part (for class-wise folds these are unseen during training).

    """
    if fixed is None:
        fixed={}
    trainIdx, valIdx, trainClasses, valClasses=_foldClasses(data, plan, foldIndex)
    trainData=data.subset(trainIdx).selectClasses(trainClasses)
    valData=_validationData(data, valIdx, valClasses)
    trainSeen=seen.take(trainClasses)
    valSeen=seen.take(valClasses)

    if stage == 'conse':
        clf=conse.trainSeenProbabilistic(trainData, fixed.get('l2Reg', 1e-2), trainConfig)
        rankings=conse.conseRankBatch(valData.features, clf, trainSeen, valSeen, cell['T'], 1)
        predictions=rankings[:, 0]
    else:
        if stage == 'lambdaSigma':
            lam, sigma=cell['lambda'], cell['sigma']
            metric=semantics.ScaledIdentityMetric(sigma)
            phantom=trainSeen
            lossObj=training.makeLoss(loss, seenEmbeddings = trainSeen)
            bases=training.trainBaseClassifiers(trainData, semantics.similarityWeights(trainSeen, phantom, metric),
                                                lossObj, trainConfig.copy(lam = lam))
        elif stage == 'etaGamma':
            lam, sigma=fixed['lambda'], fixed['sigma']
            metric=semantics.ScaledIdentityMetric(sigma)
            if phantomConfig is None:
                phantomConfig=adaptation.PhantomConfig(outerRounds = 2)
            pc=adaptation.PhantomConfig(eta = cell['eta'], gamma = cell['gamma'], h = phantomConfig.h,
                                        outerRounds = phantomConfig.outerRounds, init = 'identity')
            bases, beta=adaptation.learnPhantomEmbeddings(trainData, trainSeen, pc, trainConfig, lam = lam,
                                                          metric = metric, loss = loss)
            phantom=adaptation.phantomEmbeddingsFromBeta(beta, trainSeen)
        else:
            raise ConfigError("unknown CV stage '%s'" % (stage))
        models=synthesis.synthesize(semantics.similarityWeights(valSeen, phantom, metric), bases)
        predictions=synthesis.predictBatch(models, valData.features)

    return evaluation.perClassAccuracy(predictions, valData.labels, np.arange(valData.numClasses))

#------------------------------------------------------------------------------------------------------------
def _scoreCell(args):
    data, seen, cell, plan, loss, stage, trainConfig, fixed, phantomConfig, verbose=args
    scores=np.full(plan.numFolds, -np.inf)
    try:
        for i in range(plan.numFolds):
            scores[i]=scoreFold(data, seen, cell, plan, i, loss, stage, trainConfig, fixed = fixed,
                                phantomConfig = phantomConfig)
    except (SynCError, ArithmeticError, ValueError) as e:
        # ValueError covers numpy.linalg.LinAlgError
        if verbose == True:
            print("... WARNING: CV cell %s failed: %s" % (str(cell), e))
        return np.full(plan.numFolds, -np.inf), "%s: %s" % (type(e).__name__, e)
    if verbose == True:
        print("... cell %s: mean score = %.4f" % (str(cell), np.mean(scores)))
    return scores, None

#------------------------------------------------------------------------------------------------------------
def crossValidate(data, seen, grid, plan, loss, stage, trainConfig = None, fixed = None, phantomConfig = None,
                  numThreads = None, verbose = False):
    """Scores every cell of a hyperparameter grid by cross validation and selects the best.

    Args:
        data (:obj:`LabeledDataset`): Seen-class data.
        seen (:obj:`EmbeddingTable`): Seen-class embeddings (one row per class in `data`).
        grid (:obj:`HyperGrid`): Values to search.
        plan (:obj:`FoldPlan`): Folds (over the samples of `data`).
        loss (:obj:`Loss` or :obj:`str`): Training loss.
        stage (:obj:`str`): 'lambdaSigma' (phantoms fixed to the seen classes), 'etaGamma' (needs
            `fixed` to hold 'lambda' and 'sigma'), or 'conse' (tunes T; `fixed` may hold 'l2Reg').
        trainConfig (:obj:`TrainConfig`, optional): Solver settings.
        fixed (:obj:`dict`, optional): Frozen hyperparameters for later stages.
        phantomConfig (:obj:`PhantomConfig`, optional): Template for stage 'etaGamma' (h, rounds).
        numThreads (:obj:`int`, optional): Worker threads for cells (default: PHANTOM_SYNC_THREADS).
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        A :obj:`CVResult`. Cells that raise an error are scored -inf and flagged, rather than stopping
        the search.

    """
    if trainConfig is None:
        trainConfig=training.TrainConfig()
    if fixed is None:
        fixed={}
    if stage == 'etaGamma' and ('lambda' not in fixed.keys() or 'sigma' not in fixed.keys()):
        raise ConfigError("CV stage 'etaGamma' needs lambda and sigma fixed")
    if seen.numClasses != data.numClasses:
        raise ShapeMismatchError("seen embeddings have %d classes but data has %d" % (seen.numClasses, data.numClasses))
    if plan.folds[0][0].shape[0]+plan.folds[0][1].shape[0] != data.numSamples:
        raise InvalidFoldsError("fold plan does not cover the data")
    cells=grid.cells(stage)
    if numThreads is None:
        numThreads=getNumThreads()
    if verbose == True:
        print(">>> Cross validation (stage = %s, %d cells, %d %s folds)" % (stage, len(cells), plan.numFolds, plan.mode))
    jobs=[(data, seen, cell, plan, loss, stage, trainConfig, fixed, phantomConfig, verbose) for cell in cells]
    if numThreads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers = numThreads) as executor:
            results=list(executor.map(_scoreCell, jobs))
    else:
        results=[_scoreCell(job) for job in jobs]
    result=CVResult(stage, cells, [r[0] for r in results], [r[1] for r in results])
    if verbose == True:
        print("... best cell = %s (mean score = %.4f)" % (str(result.best), result.bestScore))

    return result

#------------------------------------------------------------------------------------------------------------
def makeCVGridPlot(result, outFileName):
    """Plots the mean validation score of every cell of a two-parameter CV stage as an image (log-spaced
    axes, failed cells left blank), marking the selected cell.

    Args:
        result (:obj:`CVResult`): Results of a 'lambdaSigma' or 'etaGamma' stage.
        outFileName (:obj:`str`): Path of the plot; the format is set by the extension.

    """
    names=list(result.cells[0].keys())
    if len(names) != 2:
        raise ConfigError("can only plot CV stages with two parameters (stage '%s' has %d)" % (result.stage, len(names)))
    xValues=sorted(set(cell[names[1]] for cell in result.cells))
    yValues=sorted(set(cell[names[0]] for cell in result.cells))
    image=np.full((len(yValues), len(xValues)), np.nan)
    for cell, score in zip(result.cells, result.meanScores):
        if np.isfinite(score):
            image[yValues.index(cell[names[0]]), xValues.index(cell[names[1]])]=score
    plotSettings.update_rcParams()
    plt.figure(figsize = (9, 6.5))
    plt.imshow(image, origin = 'lower', aspect = 'auto', interpolation = 'nearest')
    plt.colorbar(label = "mean per-class accuracy")
    plt.xticks(np.arange(len(xValues)), ["%.2g" % (x) for x in xValues], rotation = 45)
    plt.yticks(np.arange(len(yValues)), ["%.2g" % (y) for y in yValues])
    plt.plot(xValues.index(result.best[names[1]]), yValues.index(result.best[names[0]]), 'rx', ms = 14, mew = 3)
    plt.xlabel(names[1])
    plt.ylabel(names[0])
    plt.tight_layout()
    plt.savefig(outFileName)
    plt.close()
