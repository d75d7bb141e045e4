"""

This module defines pipelines - sets of tasks in phantomsync that we want to run end to end on real or
synthetic data (zero-shot classification, phantom count sweeps, the ConSE baseline, evaluation of saved
rankings).

Each pipeline takes a :class:`startUp.SynCConfig` object. Failures inside the zero-shot pipeline are
re-raised as :class:`errors.StageError`, tagged with the stage that failed.

"""

import os
import sys
import hashlib
import numpy as np
import scipy
import astropy
import astropy.table as atpy
import yaml
import phantomsync
from .errors import *
from . import startUp
from . import semantics
from . import synthesis
from . import training
from . import adaptation
from . import tuning
from . import conse
from . import evaluation
from . import datasets
from . import plotSettings
import pylab as plt

#------------------------------------------------------------------------------------------------------------
class ExperimentData(object):
    """Everything a pipeline needs to know about the data.

    Attributes:
        seenData (:obj:`LabeledDataset`): Seen-class training data.
        unseenData (:obj:`LabeledDataset`): Unseen-class test data.
        seenSources (:obj:`list`): One seen-class :obj:`EmbeddingTable` per semantic source.
        unseenSources (:obj:`list`): One unseen-class :obj:`EmbeddingTable` per semantic source.
        sourceWeights (:obj:`list`): Blending coefficients for the sources.
        hierarchy (:obj:`Hierarchy`): Class hierarchy, or None.

    """

    def __init__(self, seenData, unseenData, seenSources, unseenSources, sourceWeights = None, hierarchy = None):
        if len(seenSources) != len(unseenSources) or len(seenSources) == 0:
            raise ConfigError("need the same (non-zero) number of seen and unseen semantic sources")
        if seenData.featureDim != unseenData.featureDim:
            raise DimensionMismatchError("seen features have dimension %d but unseen features have dimension %d"
                                         % (seenData.featureDim, unseenData.featureDim))
        for seen, unseen in zip(seenSources, unseenSources):
            if seen.classIds != seenData.classIds or unseen.classIds != unseenData.classIds:
                raise ShapeMismatchError("embedding tables must follow the class order of the data")
        if sourceWeights is None:
            sourceWeights=[1.0/len(seenSources)]*len(seenSources)
        if len(sourceWeights) != len(seenSources):
            raise InvalidCoefficientsError("got %d source weights for %d semantic sources" % (len(sourceWeights), len(seenSources)))
        self.seenData=seenData
        self.unseenData=unseenData
        self.seenSources=seenSources
        self.unseenSources=unseenSources
        self.sourceWeights=list(sourceWeights)
        self.hierarchy=hierarchy


    @property
    def numSources(self):
        return len(self.seenSources)

#------------------------------------------------------------------------------------------------------------
class TrainedModel(object):
    """Output of the seen-class training stage.

    Attributes:
        bases (:obj:`BaseClassifierSet`): Base classifiers.
        phantomSources (:obj:`list`): Phantom embeddings, one :obj:`EmbeddingTable` per semantic source.
        beta (:obj:`BetaMatrix`): Phantom coefficients.
        metric (:obj:`Metric`): Metric used for the similarity weights.
        params (:obj:`dict`): Hyperparameters used.

    """

    def __init__(self, bases, phantomSources, beta, metric, params):
        self.bases=bases
        self.phantomSources=phantomSources
        self.beta=beta
        self.metric=metric
        self.params=params

#------------------------------------------------------------------------------------------------------------
def _asList(value):
    if value is None:
        return []
    if type(value) == list:
        return value
    return [value]

#------------------------------------------------------------------------------------------------------------
def _mergeTables(seen, unseen):
    if unseen is None:
        return seen
    if seen.dim != unseen.dim:
        raise DimensionMismatchError("seen and unseen embedding files have different dimensions (%d, %d)" % (seen.dim, unseen.dim))
    classIds=list(seen.classIds)
    vectors=[row for row in seen.vectors]
    for classId, row in zip(unseen.classIds, unseen.vectors):
        if classId in seen.classIds:
            if np.array_equal(row, seen.vectors[seen.indexOf(classId)]) == False:
                raise DuplicateClassError("class '%s' has different embeddings in the seen and unseen files" % (classId))
            continue
        classIds.append(classId)
        vectors.append(row)
    return semantics.EmbeddingTable(classIds, np.array(vectors))

#------------------------------------------------------------------------------------------------------------
def loadExperimentData(config, verbose = True):
    """Loads the seen / unseen data, embeddings, and (optional) class hierarchy named in the config, or
    generates a synthetic dataset if the config has a ``synthetic`` section.

    Args:
        config (:obj:`startUp.SynCConfig`): Configuration object.
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        An :obj:`ExperimentData` object.

    """
    parDict=config.parDict
    if parDict['synthetic'] is not None:
        spec=datasets.SyntheticSpec.fromDict(parDict['synthetic'], seed = config.seed)
        if verbose == True:
            print(">>> Generating synthetic dataset (S = %d, U = %d, D = %d, d = %d, seed = %d)" % (spec.S, spec.U, spec.D, spec.d, spec.seed))
        seenData, unseenData, seen, unseen=datasets.generateSynthetic(spec)
        hierarchy=None
        if spec.makeHierarchy == True:
            hierarchy=datasets.generateSyntheticHierarchy(spec)
        return ExperimentData(seenData, unseenData, [seen], [unseen], hierarchy = hierarchy)

    for key in ['seenFeatures', 'seenLabels', 'unseenFeatures', 'unseenLabels', 'seenEmbeddings']:
        if parDict[key] is None:
            raise ConfigError("'%s' must be given in the config (or use a 'synthetic' section)" % (key))
    if verbose == True:
        print(">>> Loading data")
    seenPaths=_asList(parDict['seenEmbeddings'])
    unseenPaths=_asList(parDict['unseenEmbeddings'])
    if len(unseenPaths) == 0:
        unseenPaths=[None]*len(seenPaths)
    if len(unseenPaths) != len(seenPaths):
        raise ConfigError("give one unseenEmbeddings file per seenEmbeddings file")

    sources=[]
    for seenPath, unseenPath in zip(seenPaths, unseenPaths):
        seenTable=datasets.loadEmbeddings(seenPath)
        unseenTable=datasets.loadEmbeddings(unseenPath) if unseenPath is not None else None
        sources.append((seenTable, unseenTable, _mergeTables(seenTable, unseenTable)))
    if parDict['splitFile'] is not None:
        seenIds, unseenIds=datasets.loadSplit(parDict['splitFile'])
    else:
        if sources[0][1] is None:
            raise ConfigError("without a splitFile, unseenEmbeddings must be given")
        seenIds, unseenIds=sources[0][0].classIds, sources[0][1].classIds

    seenSources, unseenSources=[], []
    for seenTable, unseenTable, allTable in sources:
        seenPart=allTable.subset(seenIds)
        unseenPart=allTable.subset(unseenIds)
        if parDict['normalizeEmbeddings'] == True:
            seenPart=semantics.normalizeEmbeddings(seenPart)
            unseenPart=semantics.normalizeEmbeddings(unseenPart)
        seenSources.append(seenPart)
        unseenSources.append(unseenPart)
    seenData=datasets.loadDataset(parDict['seenFeatures'], parDict['seenLabels'], seenIds)
    unseenData=datasets.loadDataset(parDict['unseenFeatures'], parDict['unseenLabels'], unseenIds)

    hierarchy=None
    if parDict['hierarchyFile'] is not None:
        hierarchy=evaluation.loadHierarchy(parDict['hierarchyFile'], parDict['validLabelsFile'])
        if parDict['validLabelsFile'] is None:
            hierarchy=evaluation.Hierarchy(hierarchy.nodes, hierarchy.edges, validLabels = unseenIds)
    if verbose == True:
        print("... %d seen classes (%d samples), %d unseen classes (%d samples), %d semantic source(s)"
              % (seenData.numClasses, seenData.numSamples, unseenData.numClasses, unseenData.numSamples, len(sources)))

    return ExperimentData(seenData, unseenData, seenSources, unseenSources, sourceWeights = parDict['sourceWeights'],
                          hierarchy = hierarchy)

#------------------------------------------------------------------------------------------------------------
def _runStage(stage, func, *args, **kwargs):
    """Runs func, re-raising any phantomsync error as a :class:`StageError` tagged with `stage`.

    """
    try:
        return func(*args, **kwargs)
    except StageError:
        raise
    except SynCError as e:
        raise StageError(stage, e) from e

#------------------------------------------------------------------------------------------------------------
def defaultParams(parDict):
    """Returns the hyperparameters set in the config (used when cross validation is switched off).

    """
    return {'lambda': parDict['lambda'], 'sigma': parDict['sigma'], 'eta': parDict['eta'], 'gamma': parDict['gamma']}

#------------------------------------------------------------------------------------------------------------
def numPhantomsFor(parDict, numSeen):
    """R from the config: numPhantoms if set, otherwise round(phantomRatio * S), otherwise S.

    """
    if parDict['numPhantoms'] is not None:
        return int(parDict['numPhantoms'])
    if parDict['phantomRatio'] is not None:
        return phantomCountForRatio(parDict['phantomRatio'], numSeen)
    return numSeen

#------------------------------------------------------------------------------------------------------------
def phantomCountForRatio(ratio, numSeen):
    """R = round(ratio * S) (halves round up), at least 1.

    """
    return max(1, int(np.floor(ratio*numSeen+0.5)))

#------------------------------------------------------------------------------------------------------------
def _trainConfig(config, lam):
    return training.TrainConfig.fromDict(config.parDict['trainOptions'], lam = lam, seed = config.seed)

#------------------------------------------------------------------------------------------------------------
def _hyperGrid(parDict):
    cv=parDict['cvOptions']
    default=tuning.HyperGrid.default()
    values={}
    for key in ['lambdaValues', 'sigmaValues', 'etaValues', 'gammaValues', 'conseTValues']:
        values[key]=cv[key] if cv[key] is not None else getattr(default, key)
    return tuning.HyperGrid(**values)

#------------------------------------------------------------------------------------------------------------
def crossValidateStage(config, expData, verbose = True):
    """Selects (lambda, sigma) by cross validation over the seen classes, then (if cvOptions['stage2'] is
    set) (eta, gamma) with (lambda, sigma) frozen. Results tables are written to the output directory.

    Returns:
        Dictionary of hyperparameters (lambda, sigma, eta, gamma).

    """
    parDict=config.parDict
    cv=parDict['cvOptions']
    if expData.numSources > 1 and verbose == True:
        print("... WARNING: cross validating with the first semantic source only")
    data=expData.seenData
    seen=expData.seenSources[0]
    grid=_hyperGrid(parDict)
    plan=tuning.makeFolds(data.labels, cv['folds'], cv['mode'], config.makeRNG('folds'))
    trainConfig=_trainConfig(config, parDict['lambda'])
    params=defaultParams(parDict)

    result=tuning.crossValidate(data, seen, grid, plan, parDict['loss'], 'lambdaSigma', trainConfig = trainConfig,
                                numThreads = config.numThreads, verbose = verbose)
    _writeCVResult(config, result)
    params.update(result.best)

    if cv['stage2'] == True:
        if expData.numSources > 1:
            raise IncompatibleStrategyError("learning phantom embeddings is not supported with multiple semantic sources")
        phantomConfig=adaptation.PhantomConfig(h = parDict['h'], outerRounds = max(2, parDict['phantomOuterRounds']))
        result=tuning.crossValidate(data, seen, grid, plan, parDict['loss'], 'etaGamma', trainConfig = trainConfig,
                                    fixed = {'lambda': params['lambda'], 'sigma': params['sigma']},
                                    phantomConfig = phantomConfig, numThreads = config.numThreads, verbose = verbose)
        _writeCVResult(config, result)
        params.update(result.best)

    outFileName=config.rootOutDir+os.path.sep+"cvBest.yml"
    with open(outFileName, "w") as outFile:
        yaml.safe_dump({k: float(v) for k, v in params.items()}, outFile, default_flow_style = False)
    config.recordOutput(outFileName)
    if verbose == True:
        print("... selected hyperparameters: %s" % (str(params)))

    return params

#------------------------------------------------------------------------------------------------------------
def _writeCVResult(config, result):
    outFileName=config.rootOutDir+os.path.sep+"cv_%s.csv" % (result.stage)
    result.write(outFileName)
    config.recordOutput(outFileName)
    if config.parDict['makePlots'] == True and len(result.cells[0].keys()) == 2:
        tuning.makeCVGridPlot(result, config.diagnosticsDir+os.path.sep+"cv_%s.png" % (result.stage))

#------------------------------------------------------------------------------------------------------------
def buildPhantomsStage(config, expData, numPhantoms = None, strategy = None):
    """Makes the initial phantom coefficients (beta) for R phantoms with the given strategy (defaults from
    the config). With several semantic sources, only fixed phantoms (R = S, b_r = a_r) are supported.

    Returns:
        A :obj:`BetaMatrix`.

    """
    parDict=config.parDict
    S=expData.seenData.numClasses
    if numPhantoms is None:
        numPhantoms=numPhantomsFor(parDict, S)
    if strategy is None:
        strategy=parDict['phantomInit']
    if expData.numSources > 1:
        if numPhantoms != S or strategy not in ['identity', 'auto'] or parDict['phantomOuterRounds'] > 1 \
                or parDict['metric'] == 'diagonal':
            raise IncompatibleStrategyError("with multiple semantic sources, phantoms must be fixed to the seen classes "
                                            "(R = S, identity initialization, phantomOuterRounds = 1, scaledIdentity metric)")
        return adaptation.BetaMatrix(np.eye(S))
    return adaptation.initPhantoms(strategy, expData.seenSources[0], numPhantoms, seed = config.makeRNG('init'))

#------------------------------------------------------------------------------------------------------------
def _blendedWeights(realSources, phantomSources, metric, coeffs):
    mats=[semantics.similarityWeights(real, phantom, metric) for real, phantom in zip(realSources, phantomSources)]
    if len(mats) == 1:
        return mats[0]
    return semantics.blendSimilarities(mats, coeffs)

#------------------------------------------------------------------------------------------------------------
def trainSeenStage(config, expData, params, initialBeta, verbose = True):
    """Learns the base classifiers (and, if configured, phantom embeddings and a diagonal metric) from the
    seen-class data.

    Args:
        config (:obj:`startUp.SynCConfig`): Configuration object.
        expData (:obj:`ExperimentData`): Data.
        params (:obj:`dict`): Hyperparameters (lambda, sigma, eta, gamma).
        initialBeta (:obj:`BetaMatrix`): Initial phantom coefficients (see :func:`buildPhantomsStage`).
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        A :obj:`TrainedModel`.

    """
    parDict=config.parDict
    data=expData.seenData
    seen=expData.seenSources[0]
    trainConfig=_trainConfig(config, params['lambda'])
    loss=training.makeLoss(parDict['loss'], seenEmbeddings = seen)
    metric=semantics.ScaledIdentityMetric(params['sigma'])

    if expData.numSources > 1:
        weights=_blendedWeights(expData.seenSources, expData.seenSources, metric, expData.sourceWeights)
        bases=training.trainBaseClassifiers(data, weights, loss, trainConfig, verbose = verbose)
        return TrainedModel(bases, list(expData.seenSources), initialBeta, metric, params)

    phantomConfig=adaptation.PhantomConfig(eta = params['eta'], gamma = params['gamma'], h = parDict['h'],
                                           outerRounds = parDict['phantomOuterRounds'],
                                           numPhantoms = initialBeta.numPhantoms)
    bases, beta=adaptation.learnPhantomEmbeddings(data, seen, phantomConfig, trainConfig, lam = params['lambda'],
                                                  metric = metric, loss = loss, initialBeta = initialBeta,
                                                  verbose = verbose)
    phantom=adaptation.phantomEmbeddingsFromBeta(beta, seen)

    if parDict['metric'] == 'diagonal':
        options=parDict['metricOptions']
        metricConfig=adaptation.MetricLearnConfig(gammaM = options['gammaM'], sigma0 = 1.0/params['sigma'],
                                                  folds = options['folds'], outerRounds = options['outerRounds'])
        metric, metricBases=adaptation.learnMetric(data, seen, phantom, metricConfig, trainConfig, lam = params['lambda'],
                                                   loss = loss, seed = config.makeRNG('folds'), verbose = verbose)
        # Final fit on all of the seen data with the learned metric
        bases=training.trainBaseClassifiers(data, semantics.similarityWeights(seen, phantom, metric), loss,
                                            trainConfig, initial = bases, verbose = verbose)
        bases.trainInfo['metricSteps']=metricBases.trainInfo['metricSteps']

    return TrainedModel(bases, [phantom], beta, metric, params)

#------------------------------------------------------------------------------------------------------------
def synthesizeStage(expData, model):
    """Synthesizes classifiers for the unseen classes from the trained base classifiers.

    Returns:
        A :obj:`ClassifierSet` over the unseen classes.

    """
    weights=_blendedWeights(expData.unseenSources, model.phantomSources, model.metric, expData.sourceWeights)
    return synthesis.synthesize(weights, model.bases)

#------------------------------------------------------------------------------------------------------------
def _maxRankK(ks, numClasses):
    return max(1, min(max(ks), numClasses))

#------------------------------------------------------------------------------------------------------------
def evaluateStage(config, expData, rankings, verbose = True):
    """Evaluates (N x k) rankings of unseen class indices against the unseen test labels.

    Returns:
        An :obj:`EvalReport`.

    """
    classIds=expData.unseenData.classIds
    rankingIds=[[classIds[i] for i in row] for row in rankings]
    truths=[classIds[i] for i in expData.unseenData.labels]
    return evaluation.evaluateRankings(rankingIds, truths, classIds, config.parDict['evalK'],
                                       hierarchy = expData.hierarchy, verbose = verbose)

#------------------------------------------------------------------------------------------------------------
def writeModel(config, model, models = None):
    """Writes the learned matrices to the ``matrices`` directory: base classifiers, phantom coefficients,
    phantom embeddings, metric weights (the diagonal of the inverse covariance) and, if given, the
    synthesized classifiers.

    """
    d=config.matricesDir+os.path.sep
    files=[]
    datasets.saveMatrix(d+"bases.txt", model.bases.vectors)
    files.append(d+"bases.txt")
    datasets.saveMatrix(d+"beta.txt", model.beta.coeffs)
    files.append(d+"beta.txt")
    for i in range(len(model.phantomSources)):
        fileName=d+"phantomEmbeddings.txt" if len(model.phantomSources) == 1 else d+"phantomEmbeddings_source%d.txt" % (i)
        datasets.saveEmbeddings(fileName, model.phantomSources[i])
        files.append(fileName)
    datasets.saveMatrix(d+"metric.txt", model.metric.dimensionWeights(model.phantomSources[0].dim))
    files.append(d+"metric.txt")
    if models is not None:
        datasets.saveMatrix(d+"unseenClassifiers.txt", models.vectors)
        datasets.saveLabels(d+"unseenClassifiers_classIds.txt", models.classIds)
        files=files+[d+"unseenClassifiers.txt", d+"unseenClassifiers_classIds.txt"]
    for f in files:
        config.recordOutput(f)

#------------------------------------------------------------------------------------------------------------
def _zeroShot(config, expData, params, numPhantoms = None, strategy = None, verbose = True):
    beta=_runStage('phantoms', buildPhantomsStage, config, expData, numPhantoms = numPhantoms, strategy = strategy)
    model=_runStage('train', trainSeenStage, config, expData, params, beta, verbose = verbose)
    models=_runStage('synthesize', synthesizeStage, expData, model)

    def rankAndEvaluate():
        k=_maxRankK(config.parDict['evalK'], models.numClasses)
        rankings=synthesis.rankClassesBatch(models, expData.unseenData.features, k)
        return evaluateStage(config, expData, rankings, verbose = verbose)

    report=_runStage('evaluate', rankAndEvaluate)
    return model, models, report

#------------------------------------------------------------------------------------------------------------
def runZeroShot(config, verbose = True):
    """Runs the zero-shot pipeline: optional cross validation, phantom construction, training on the
    seen classes, synthesis of the unseen-class classifiers, and evaluation on the unseen test data. The
    report and all learned matrices are written to the output directory.

    Args:
        config (:obj:`startUp.SynCConfig`): Configuration object.
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        An :obj:`EvalReport`.

    Raises:
        StageError: If any stage fails (the original exception is in its `cause` attribute).

    """
    expData=loadExperimentData(config, verbose = verbose)
    params=defaultParams(config.parDict)
    if config.parDict['crossValidate'] == True:
        params=_runStage('cv', crossValidateStage, config, expData, verbose = verbose)
    model, models, report=_zeroShot(config, expData, params, verbose = verbose)

    def write():
        writeModel(config, model, models)
        outFileName=config.rootOutDir+os.path.sep+"zeroShotReport.csv"
        report.write(outFileName)
        config.recordOutput(outFileName)

    _runStage('write', write)
    if verbose == True:
        print("... unseen per-class accuracy = %.4f" % (report.perClassAccuracy))
        print("... time since start = %.3f sec" % (config.timeSinceStart()))

    return report

#------------------------------------------------------------------------------------------------------------
def runTrain(config, verbose = True):
    """Trains on the seen classes only (optional cross validation, phantoms, base classifiers, metric),
    writing the learned matrices.

    Returns:
        A :obj:`TrainedModel`.

    """
    expData=loadExperimentData(config, verbose = verbose)
    params=defaultParams(config.parDict)
    if config.parDict['crossValidate'] == True:
        params=_runStage('cv', crossValidateStage, config, expData, verbose = verbose)
    beta=_runStage('phantoms', buildPhantomsStage, config, expData)
    model=_runStage('train', trainSeenStage, config, expData, params, beta, verbose = verbose)
    _runStage('write', writeModel, config, model)
    if verbose == True and 'metricSteps' in model.bases.trainInfo.keys():
        print("... learned metric diagonal: %s" % (np.array2string(np.sqrt(model.metric.dimensionWeights(model.phantomSources[0].dim)), precision = 4)))

    return model

#------------------------------------------------------------------------------------------------------------
def runCrossValidation(config, verbose = True):
    """Runs only the cross validation stage(s), writing the results tables.

    Returns:
        Dictionary of selected hyperparameters.

    """
    expData=loadExperimentData(config, verbose = verbose)
    return _runStage('cv', crossValidateStage, config, expData, verbose = verbose)

#------------------------------------------------------------------------------------------------------------
def sweepPhantomCount(config, ratios = None, verbose = True):
    """Runs the zero-shot pipeline for a range of phantom counts R = round(ratio * S). Phantoms are
    initialized with k-means centroids of the seen embeddings below R = S, as the seen embeddings at
    R = S, and as the seen embeddings plus random convex combinations above. Accuracies are reported
    relative to the R = S run.

    Args:
        config (:obj:`startUp.SynCConfig`): Configuration object.
        ratios (:obj:`list`, optional): Ratios R / S in (0, 2] (default: config sweepRatios).
        verbose (:obj:`bool`, optional): If True, print progress.

    Returns:
        An astropy Table with columns ratio, R, strategy, accuracy, relativeAccuracy.

    """
    if ratios is None:
        ratios=config.parDict['sweepRatios']
    for ratio in ratios:
        if ratio <= 0 or ratio > 2:
            raise InvalidSpecError("phantom ratios must be in the range (0, 2] (got %s)" % (str(ratio)))
    expData=loadExperimentData(config, verbose = verbose)
    params=defaultParams(config.parDict)
    if config.parDict['crossValidate'] == True:
        params=_runStage('cv', crossValidateStage, config, expData, verbose = verbose)
    S=expData.seenData.numClasses

    accuracies={}
    def accuracyFor(R):
        if R not in accuracies.keys():
            if verbose == True:
                print(">>> Phantom count sweep: R = %d (S = %d)" % (R, S))
            accuracies[R]=_zeroShot(config, expData, params, numPhantoms = R, strategy = 'auto', verbose = verbose)[2].perClassAccuracy
        return accuracies[R]

    reference=accuracyFor(S)
    if reference == 0:
        raise NumericError("accuracy at R = S is zero, so relative accuracies are undefined")
    tab=atpy.Table(names = ['ratio', 'R', 'strategy', 'accuracy', 'relativeAccuracy'],
                   dtype = [float, int, 'U12', float, float])
    for ratio in ratios:
        R=phantomCountForRatio(ratio, S)
        strategy='kmeans' if R < S else ('identity' if R == S else 'mixed')
        accuracy=accuracyFor(R)
        tab.add_row([ratio, R, strategy, accuracy, accuracy/reference])
    tab.meta['SYNCVER']=phantomsync.__version__

    outFileName=config.rootOutDir+os.path.sep+"phantomSweep.csv"
    tab.write(outFileName, overwrite = True)
    config.recordOutput(outFileName)
    if config.parDict['makePlots'] == True:
        makeSweepPlot(tab, config.diagnosticsDir+os.path.sep+"phantomSweep.png")
    if verbose == True:
        for row in tab:
            print("... ratio = %.2f, R = %d: accuracy = %.4f (relative = %.4f)" % (row['ratio'], row['R'], row['accuracy'], row['relativeAccuracy']))

    return tab

#------------------------------------------------------------------------------------------------------------
def makeSweepPlot(tab, outFileName):
    """Plots relative accuracy versus phantom ratio R / S.

    """
    plotSettings.update_rcParams()
    plt.figure(figsize = (9, 6.5))
    ax=plt.axes([0.13, 0.13, 0.82, 0.82])
    order=np.argsort(tab['ratio'])
    plt.plot(np.array(tab['ratio'])[order], np.array(tab['relativeAccuracy'])[order], 'D-', ms = 8)
    plt.axhline(1.0, color = 'black', ls = '--', lw = 1)
    plt.xlabel("$R / S$")
    plt.ylabel("relative accuracy")
    plt.savefig(outFileName)
    plt.close()

#------------------------------------------------------------------------------------------------------------
def runConSE(config, verbose = True):
    """Runs the ConSE baseline: logistic regression on the seen classes, then unseen classes ranked by
    cosine similarity to the probability-weighted average of the top-T seen embeddings. T is optionally
    chosen by class-wise cross validation.

    Returns:
        An :obj:`EvalReport` (also written to ``conseReport.csv``).

    """
    parDict=config.parDict
    options=parDict['conseOptions']
    expData=loadExperimentData(config, verbose = verbose)
    if expData.numSources > 1 and verbose == True:
        print("... WARNING: ConSE uses the first semantic source only")
    data=expData.seenData
    seen, unseen=expData.seenSources[0], expData.unseenSources[0]
    conseConfig=conse.ConseConfig(T = options['T'], l2Reg = options['l2Reg'])
    trainConfig=_trainConfig(config, conseConfig.l2Reg)

    T=conseConfig.T
    if options['crossValidateT'] == True:
        grid=tuning.HyperGrid(conseTValues = _hyperGrid(parDict).conseTValues)
        plan=tuning.makeFolds(data.labels, parDict['cvOptions']['folds'], 'classWise', config.makeRNG('folds'))
        result=_runStage('cv', tuning.crossValidate, data, seen, grid, plan, parDict['loss'], 'conse',
                         trainConfig = trainConfig, fixed = {'l2Reg': conseConfig.l2Reg},
                         numThreads = config.numThreads, verbose = verbose)
        _writeCVResult(config, result)
        T=result.best['T']

    if verbose == True:
        print(">>> Training seen-class logistic regression (l2Reg = %g)" % (conseConfig.l2Reg))
    clf=_runStage('train', conse.trainSeenProbabilistic, data, conseConfig.l2Reg, trainConfig, verbose = verbose)

    def rankAndEvaluate():
        k=_maxRankK(parDict['evalK'], unseen.numClasses)
        rankings=conse.conseRankBatch(expData.unseenData.features, clf, seen, unseen, T, k)
        return evaluateStage(config, expData, rankings, verbose = verbose)

    report=_runStage('evaluate', rankAndEvaluate)

    def write():
        outFileName=config.rootOutDir+os.path.sep+"conseReport.csv"
        report.write(outFileName)
        config.recordOutput(outFileName)

    _runStage('write', write)
    if verbose == True:
        print("... ConSE (T = %d) unseen per-class accuracy = %.4f" % (T, report.perClassAccuracy))

    return report

#------------------------------------------------------------------------------------------------------------
def loadRankings(fileName):
    """Reads a rankings file: one line per sample, listing class ids from most to least likely.

    """
    rankings=[]
    for line in datasets._readLines(fileName):
        if line.strip() == "":
            continue
        rankings.append(line.split())
    return rankings

#------------------------------------------------------------------------------------------------------------
def evaluateRankingsFile(rankingsFileName, truthsFileName, ks, hierarchyFileName = None,
                         validLabelsFileName = None, verbose = True):
    """Evaluates saved rankings (see :func:`loadRankings`) against a labels file.

    Returns:
        An :obj:`EvalReport`.

    """
    rankings=loadRankings(rankingsFileName)
    truths=datasets.loadLabels(truthsFileName)
    hierarchy=None
    if hierarchyFileName is not None:
        hierarchy=evaluation.loadHierarchy(hierarchyFileName, validLabelsFileName)
    return evaluation.evaluateRankings(rankings, truths, None, ks, hierarchy = hierarchy, verbose = verbose)

#------------------------------------------------------------------------------------------------------------
def _sha256(fileName):
    digest=hashlib.sha256()
    with open(fileName, "rb") as inFile:
        for chunk in iter(lambda: inFile.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()

#------------------------------------------------------------------------------------------------------------
def writeManifest(config, command):
    """Writes ``manifest.yml`` to the output directory: the command, the config as given (with
    defaults filled in), the seed, package versions, and the SHA-256 digest of every output file written
    during the run. The manifest can be passed back as a config file to repeat the run.

    Returns:
        Path to the manifest.

    """
    outputs={}
    for path in config.outputFiles:
        if os.path.exists(path):
            outputs[os.path.relpath(path, config.rootOutDir)]=_sha256(path)
    manifest={'manifestVersion': 1,
              'command': command,
              'seed': config.seed,
              'versions': {'phantomsync': phantomsync.__version__, 'numpy': np.__version__,
                           'scipy': scipy.__version__, 'astropy': astropy.__version__,
                           'python': sys.version.split()[0]},
              'config': config._origParDict,
              'outputs': outputs}
    outFileName=config.rootOutDir+os.path.sep+"manifest.yml"
    with open(outFileName, "w") as outFile:
        yaml.safe_dump(manifest, outFile, default_flow_style = False, sort_keys = True)

    return outFileName
