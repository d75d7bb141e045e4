"""

Library for running phantomsync tests using Robot Framework

"""

import os
import sys
import subprocess
import shutil
import collections
import yaml
import numpy as np
from phantomsync import startUp, semantics, synthesis, training, adaptation, tuning, conse, evaluation
from phantomsync import datasets, pipelines, plotSettings
from phantomsync.errors import *
import pylab as plt

plotSettings.update_rcParams()
plotTitleSize=14

#------------------------------------------------------------------------------------------------------------
def _toyData(numClasses = 3, featureDim = 3, perClass = 10, spread = 0.3, scale = 2.0, seed = 0):
    """Gaussian blobs around random class means.

    """
    rng=np.random.default_rng(seed)
    means=scale*rng.standard_normal((numClasses, featureDim))
    labels=np.repeat(np.arange(numClasses), perClass)
    features=means[labels]+spread*rng.standard_normal((labels.shape[0], featureDim))
    return training.LabeledDataset(features, labels)

#------------------------------------------------------------------------------------------------------------
def _relativeError(a, b):
    a=np.asarray(a, dtype = float)
    b=np.asarray(b, dtype = float)
    scale=max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a-b))/scale

#------------------------------------------------------------------------------------------------------------
def _numericalGradient(func, x, h = 1e-5):
    x=np.array(x, dtype = float)
    grad=np.zeros(x.shape)
    for index in np.ndindex(*x.shape):
        xPlus=x.copy()
        xMinus=x.copy()
        xPlus[index]+=h
        xMinus[index]-=h
        grad[index]=(func(xPlus)-func(xMinus))/(2*h)
    return grad

#------------------------------------------------------------------------------------------------------------
def _circleTable(classIds, anglesDeg):
    angles=np.radians(np.asarray(anglesDeg, dtype = float))
    return semantics.EmbeddingTable(classIds, np.stack([np.cos(angles), np.sin(angles)], axis = 1))

#------------------------------------------------------------------------------------------------------------
def _raises(errorClass, func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except errorClass:
        return True
    except Exception as e:
        print("... expected %s, got %s: %s" % (errorClass.__name__, e.__class__.__name__, e))
        return False
    print("... expected %s, but nothing was raised" % (errorClass.__name__))
    return False

#------------------------------------------------------------------------------------------------------------
class SynCTests(object):

    def __init__(self):
        """Basic set-up for running tests. Anything written by a test goes under the cache dir; plots
        go in the plots dir.

        """

        self._status = ''

        self.cacheDir="testsCache"
        if os.path.exists(self.cacheDir) == False:
            os.makedirs(self.cacheDir)

        self.runDir=os.path.abspath(self.cacheDir)

        self.plotsDir="plots"
        if os.path.exists(self.plotsDir) == False:
            os.makedirs(self.plotsDir)

        self.configFileName=None
        self._lastProcess=None


    def _setStatus(self, passed, label = None):
        if label is not None:
            print("... %s" % (label))
        if passed == True:
            self._status="SUCCESS"
        else:
            self._status="FAILED"


    def _outDir(self, name):
        outDir=os.path.abspath(self.cacheDir+os.path.sep+name)
        if os.path.exists(outDir) == True:
            shutil.rmtree(outDir)
        return outDir


    def _syntheticConfig(self, name, seed = 0, synthetic = None, **overrides):
        """Config for a run on the standard synthetic dataset (S = 40, U = 10, D = 20, d = 10), with a small
        CV grid and a capped number of solver iterations.

        """
        syntheticDict={'S': 40, 'U': 10, 'D': 20, 'd': 10, 'samplesPerClass': 100, 'noiseStd': 0.05}
        if synthetic is not None:
            syntheticDict.update(synthetic)
        parDict={'synthetic': syntheticDict,
                 'crossValidate': True,
                 'cvOptions': {'folds': 4, 'lambdaValues': [0.01, 1.0], 'sigmaValues': [0.5, 1.0, 2.0]},
                 'trainOptions': {'maxIters': 500},
                 'makePlots': False,
                 'seed': seed}
        parDict.update(overrides)
        return startUp.SynCConfig(parDict, outputDir = self._outDir(name), verbose = False)

    #--------------------------------------------------------------------------------------------------------
    # Semantic embeddings and similarity weights

    def check_mahalanobis_examples(self):
        d1=semantics.mahalanobisDistance([1, 0], [0, 1], semantics.ScaledIdentityMetric(1.0))
        d2=semantics.mahalanobisDistance([1, 1], [0, 0], semantics.DiagonalMetric([2, 1]))
        d3=semantics.mahalanobisDistance([1, 0], [0, 1], semantics.ScaledIdentityMetric(2.0))
        mismatch=_raises(DimensionMismatchError, semantics.mahalanobisDistance, [1, 0], [0, 1, 0],
                         semantics.ScaledIdentityMetric(1.0))
        badSigma=_raises(InvalidSpecError, semantics.ScaledIdentityMetric, 0.0)
        print("... distances = %.6f, %.6f, %.6f" % (d1, d2, d3))
        self._setStatus(abs(d1-2) < 1e-12 and abs(d2-5) < 1e-12 and abs(d3-0.5) < 1e-12 and mismatch and badSigma)


    def check_similarity_examples(self):
        metric=semantics.ScaledIdentityMetric(1.0)
        real=semantics.EmbeddingTable(['a'], [[0.0]])
        phantom=semantics.EmbeddingTable(['p0', 'p1'], [[0.0], [1.0]])
        row=semantics.similarityWeights(real, phantom, metric).weights[0]
        expected=np.array([1.0, np.exp(-1.0)])/(1+np.exp(-1.0))
        print("... s = %s (expected %s)" % (np.array2string(row, precision = 4), np.array2string(expected, precision = 4)))
        table=semantics.EmbeddingTable(['a', 'b', 'c'], [[0.0], [1.0], [2.0]])
        sharp=semantics.similarityWeights(table, table, semantics.ScaledIdentityMetric(1e-3)).weights
        offDiagonal=float(np.max(sharp-np.diag(np.diag(sharp))))
        print("... largest off-diagonal weight at sigma = 1e-3: %.3e" % (offDiagonal))
        self._setStatus(np.allclose(row, expected, atol = 1e-12) and abs(row[0]-0.7311) < 1e-4
                        and offDiagonal < 1e-6 and np.allclose(np.diag(sharp), 1.0))


    def check_similarity_rows_stochastic(self, numTrials = 1000):
        rng=np.random.default_rng(1234)
        passed=True
        for trial in range(int(numTrials)):
            C, R, d=rng.integers(1, 8), rng.integers(1, 8), rng.integers(1, 6)
            A=rng.standard_normal((C, d))
            B=rng.standard_normal((R, d))
            # Bandwidths down to 1e-3 push far weights below the double range
            if rng.random() < 0.5:
                metric=semantics.ScaledIdentityMetric(10**rng.uniform(-3, 1))
            else:
                metric=semantics.DiagonalMetric(10**rng.uniform(-1, 3, d))
            S=semantics.similarityArray(A, B, metric)
            if np.any(S <= 0) or np.any(abs(S.sum(axis = 1)-1) > 1e-10):
                print("... trial %d: rows not strictly positive and stochastic" % (trial))
                passed=False
            # Batching rows must not change the weights
            for c in range(C):
                if np.allclose(semantics.similarityArray(A[c:c+1], B, metric)[0], S[c], rtol = 0, atol = 1e-14) == False:
                    print("... trial %d: row %d depends on batching" % (trial, c))
                    passed=False
        far=semantics.similarityWeights(_circleTable(['a', 'b'], [0, 180]), _circleTable(['p', 'q'], [0, 180]),
                                        semantics.ScaledIdentityMetric(1e-3)).weights
        print("... smallest weight between antipodal classes at sigma = 1e-3: %.3e" % (far.min()))
        self._setStatus(passed and far.min() > 0)


    def check_similarity_shift(self, numTrials = 100):
        rng=np.random.default_rng(4321)
        passed=True
        for trial in range(int(numTrials)):
            C, R, d=rng.integers(1, 8), rng.integers(1, 8), rng.integers(1, 6)
            A=rng.standard_normal((C, d))
            B=rng.standard_normal((R, d))
            sigma=10**rng.uniform(-0.3, 0.5)
            S=semantics.similarityArray(A, B, semantics.ScaledIdentityMetric(sigma))
            dist=((A[:, np.newaxis, :]-B[np.newaxis, :, :])**2).sum(axis = 2)/sigma**2
            shift=rng.uniform(-50, 50)
            for offset in [0.0, shift]:
                expected=np.exp(-(dist+offset))
                expected=expected/expected.sum(axis = 1, keepdims = True)
                if np.allclose(S, expected, rtol = 0, atol = 1e-12) == False:
                    print("... trial %d: rows differ from explicit softmax (offset %.3f)" % (trial, offset))
                    passed=False
        self._setStatus(passed)


    def check_blend_examples(self):
        m1=semantics.SimilarityMatrix([[1.0, 0.0]])
        m2=semantics.SimilarityMatrix([[0.0, 1.0]])
        blended=semantics.blendSimilarities([m1, m2], [0.5, 0.5]).weights
        badSum=_raises(InvalidCoefficientsError, semantics.blendSimilarities, [m1, m2], [0.7, 0.2])
        negative=_raises(InvalidCoefficientsError, semantics.blendSimilarities, [m1, m2], [1.5, -0.5])
        m3=semantics.SimilarityMatrix([[0.5, 0.25, 0.25]])
        shapes=_raises(ShapeMismatchError, semantics.blendSimilarities, [m1, m3], [0.5, 0.5])
        # Blending a matrix with itself gives it back
        same=semantics.similarityWeights(_circleTable(['a', 'b', 'c'], [0, 100, 200]),
                                         _circleTable(['p', 'q'], [30, 250]), semantics.ScaledIdentityMetric(0.7))
        selfBlend=semantics.blendSimilarities([same, same], [0.3, 0.7]).weights
        idempotent=np.allclose(selfBlend, same.weights, rtol = 0, atol = 1e-15)
        self._setStatus(np.allclose(blended, [[0.5, 0.5]]) and badSum and negative and shapes and idempotent)


    def check_embedding_table_errors(self):
        zeroRow=semantics.EmbeddingTable(['a', 'b'], [[1.0, 0.0], [0.0, 0.0]])
        try:
            semantics.normalizeEmbeddings(zeroRow)
            zeroCaught=False
        except ZeroVectorError as e:
            zeroCaught=(e.classId == 'b')
        duplicate=_raises(DuplicateClassError, semantics.EmbeddingTable, ['a', 'a'], [[1.0], [2.0]])
        nonFinite=_raises(NonFiniteError, semantics.EmbeddingTable, ['a'], [[np.nan]])
        normed=semantics.normalizeEmbeddings(semantics.EmbeddingTable(['a', 'b'], [[3.0, 4.0], [0.0, 2.0]]))
        unitNorms=np.allclose(np.linalg.norm(normed.vectors, axis = 1), 1.0)
        self._setStatus(zeroCaught and duplicate and nonFinite and unitNorms and normed.normalized)

    #--------------------------------------------------------------------------------------------------------
    # Synthesis and prediction

    def check_synthesis_examples(self):
        weights=semantics.SimilarityMatrix([[1.0, 0.0], [0.5, 0.5]], rowClasses = ['x', 'y'])
        bases=synthesis.BaseClassifierSet([[1.0, 2.0], [3.0, 4.0]])
        models=synthesis.synthesize(weights, bases)
        exact=np.allclose(models.vectors, [[1.0, 2.0], [2.0, 3.0]]) and models.classIds == ['x', 'y']
        # Linearity in the base classifiers
        rng=np.random.default_rng(7)
        V1=rng.standard_normal((2, 2))
        V2=rng.standard_normal((2, 2))
        lhs=synthesis.synthesize(weights, synthesis.BaseClassifierSet(2*V1+3*V2)).vectors
        rhs=2*synthesis.synthesize(weights, synthesis.BaseClassifierSet(V1)).vectors+3*synthesis.synthesize(weights, synthesis.BaseClassifierSet(V2)).vectors
        linear=np.allclose(lhs, rhs, atol = 1e-12)
        mismatch=_raises(ShapeMismatchError, synthesis.synthesize, weights, synthesis.BaseClassifierSet([[1.0, 2.0]]))
        self._setStatus(exact and linear and mismatch)


    def check_ranking_examples(self):
        models=synthesis.ClassifierSet(['class1', 'class2', 'class3'], [[3.0], [1.0], [2.0]])
        top2=synthesis.rankClasses(models, [1.0], 2)
        tied=synthesis.ClassifierSet(['first', 'second'], [[1.0, 0.0], [0.0, 1.0]])
        tieWinner=synthesis.predict(tied, [1.0, 1.0])
        tieRank=synthesis.rankClasses(tied, [1.0, 1.0], 2)
        tooMany=_raises(KTooLargeError, synthesis.rankClasses, models, [1.0], 4)
        zeroK=_raises(KTooLargeError, synthesis.rankClasses, models, [1.0], 0)
        badDim=_raises(DimensionMismatchError, synthesis.predict, models, [1.0, 2.0])
        print("... top 2 = %s, tie goes to '%s'" % (top2, tieWinner))
        self._setStatus(top2 == ['class1', 'class3'] and tieWinner == 'first' and tieRank == ['first', 'second']
                        and tooMany and zeroK and badDim)


    def check_rank_agrees_with_predict(self, numTrials = 100):
        rng=np.random.default_rng(99)
        passed=True
        for trial in range(int(numTrials)):
            C, D=rng.integers(1, 8), rng.integers(1, 6)
            models=synthesis.ClassifierSet(["c%d" % (i) for i in range(C)], rng.standard_normal((C, D)))
            x=rng.standard_normal(D)
            k=int(rng.integers(1, C+1))
            ranked=synthesis.rankClasses(models, x, k)
            if ranked[0] != synthesis.predict(models, x) or len(set(ranked)) != k:
                passed=False
            batch=synthesis.rankClassesBatch(models, x.reshape(1, -1), k)[0]
            if [models.classIds[i] for i in batch] != ranked:
                passed=False
        self._setStatus(passed)

    #--------------------------------------------------------------------------------------------------------
    # Training

    def check_ovo_objective_examples(self):
        data=training.LabeledDataset([[2.0]], [0])
        weights=semantics.SimilarityMatrix([[1.0]])
        value1=training.ovoObjective(np.array([[1.0]]), data, weights, 1.0)
        value0=training.ovoObjective(np.array([[0.0]]), data, weights, 1.0)
        print("... objective at v = 1: %.6f, at v = 0: %.6f" % (value1, value0))
        mismatch=_raises(ShapeMismatchError, training.ovoObjective, np.array([[1.0, 2.0]]), data, weights, 1.0)
        self._setStatus(abs(value1-0.5) < 1e-12 and abs(value0-1.0) < 1e-12 and mismatch)


    def check_cs_loss_examples(self):
        l0=training.csLoss([2.0, 1.0], 0)
        l1=training.csLoss([2.0, 1.0], 1)
        scaled=training.csLoss([2.0, 1.0], 1, delta = lambda c, y: 3.0)
        tooFew=_raises(TooFewClassesError, training.csLoss, [2.0], 0)
        badLabel=_raises(InvalidLabelError, training.csLoss, [2.0, 1.0], 2)
        print("... losses = %.3f, %.3f, %.3f" % (l0, l1, scaled))
        self._setStatus(l0 == 0.0 and abs(l1-2.0) < 1e-12 and abs(scaled-4.0) < 1e-12 and tooFew and badLabel)


    def check_ovo_gradient(self, numTrials = 20, tolerance = 1e-5):
        rng=np.random.default_rng(2024)
        worst=0.0
        for trial in range(int(numTrials)):
            S, R, D=rng.integers(2, 6), rng.integers(1, 6), rng.integers(1, 8)
            N=int(rng.integers(S, 30))
            labels=np.concatenate([np.arange(S), rng.integers(0, S, N-S)])
            data=training.LabeledDataset(rng.standard_normal((N, D)), labels)
            weights=rng.dirichlet(np.ones(R), size = S)
            V=0.3*rng.standard_normal((R, D))
            lam=rng.uniform(0.1, 2.0)
            regularize='classifiers' if trial % 2 == 0 else 'bases'
            analytic=training.ovoGradient(V, data, weights, lam, regularize = regularize)
            numeric=_numericalGradient(lambda VV: training.ovoObjective(VV, data, weights, lam, regularize = regularize), V)
            worst=max(worst, _relativeError(analytic, numeric))
        self._setStatus(worst <= float(tolerance), "worst relative gradient error = %.3e" % (worst))


    def check_cs_gradient(self, numTrials = 20, tolerance = 1e-5):
        """Random points have a unique inner maximum and no margin exactly at zero (almost surely), so
        the Crammer-Singer objectives are differentiable there.

        """
        rng=np.random.default_rng(2025)
        worst=0.0
        for trial in range(int(numTrials)):
            S, R, D, d=rng.integers(2, 6), rng.integers(1, 6), rng.integers(1, 8), rng.integers(1, 4)
            N=int(rng.integers(S, 30))
            labels=np.concatenate([np.arange(S), rng.integers(0, S, N-S)])
            data=training.LabeledDataset(rng.standard_normal((N, D)), labels)
            weights=rng.dirichlet(np.ones(R), size = S)
            V=0.3*rng.standard_normal((R, D))
            lam=rng.uniform(0.1, 2.0)
            seen=semantics.EmbeddingTable(["c%d" % (i) for i in range(S)], rng.standard_normal((S, d)))
            for loss in [training.CrammerSingerLoss(), training.StructuredCrammerSingerLoss(seen)]:
                analytic=training.csGradient(V, data, weights, lam, loss = loss)
                numeric=_numericalGradient(lambda VV: training.csObjective(VV, data, weights, lam, loss = loss), V)
                worst=max(worst, _relativeError(analytic, numeric))
        self._setStatus(worst <= float(tolerance), "worst relative gradient error = %.3e" % (worst))


    def check_ovo_convexity(self, numTrials = 200):
        rng=np.random.default_rng(77)
        passed=True
        for trial in range(int(numTrials)):
            S, R, D=rng.integers(2, 5), rng.integers(1, 5), rng.integers(1, 5)
            N=int(rng.integers(S, 20))
            labels=np.concatenate([np.arange(S), rng.integers(0, S, N-S)])
            data=training.LabeledDataset(rng.standard_normal((N, D)), labels)
            weights=rng.dirichlet(np.ones(R), size = S)
            V1=rng.standard_normal((R, D))
            V2=rng.standard_normal((R, D))
            t=rng.random()
            lam=rng.uniform(0, 2)
            lhs=training.ovoObjective(t*V1+(1-t)*V2, data, weights, lam)
            rhs=t*training.ovoObjective(V1, data, weights, lam)+(1-t)*training.ovoObjective(V2, data, weights, lam)
            if lhs > rhs+1e-9*max(1.0, abs(rhs)):
                print("... trial %d: %.12f > %.12f" % (trial, lhs, rhs))
                passed=False
        self._setStatus(passed)


    def check_degenerate_synthesis_matches_independent(self):
        data=_toyData(numClasses = 3, featureDim = 3, perClass = 10, seed = 3)
        seen=semantics.EmbeddingTable(['a', 'b', 'c'], np.eye(3))
        weights=semantics.similarityWeights(seen, seen, semantics.ScaledIdentityMetric(1e-3))
        config=training.TrainConfig(lam = 1.0, maxIters = 5000, gradTol = 1e-10)
        bases=training.trainBaseClassifiers(data, weights, 'ovo', config)
        models=synthesis.synthesize(weights, bases)
        independent=training.trainIndependentClassifiers(data, config)
        diff=float(np.max(abs(synthesis.decisionValues(models, data.features)-synthesis.decisionValues(independent, data.features))))
        self._setStatus(diff <= 1e-4, "max decision value difference = %.3e" % (diff))


    def check_training_is_monotone(self):
        passed=True
        for loss in ['ovo', 'cs']:
            data=_toyData(numClasses = 4, featureDim = 5, perClass = 8, seed = 11)
            rng=np.random.default_rng(5)
            weights=rng.dirichlet(np.ones(6), size = 4)
            bases=training.trainBaseClassifiers(data, weights, loss, training.TrainConfig(lam = 0.5, maxIters = 300))
            history=np.array(bases.trainInfo['history'])
            increases=np.diff(history)
            if np.any(increases > 1e-12*max(1.0, abs(history[0]))):
                print("... %s objective increased during training" % (loss))
                passed=False
            if history[-1] >= history[0]:
                print("... %s objective did not decrease" % (loss))
                passed=False
        self._setStatus(passed)


    def check_loss_errors(self):
        unknown=_raises(ConfigError, training.makeLoss, 'hinge')
        noEmbeddings=_raises(ConfigError, training.makeLoss, 'struct')
        badLabels=_raises(InvalidLabelError, training.LabeledDataset, [[1.0], [2.0]], [0, 5], ['a', 'b'])
        nonFinite=_raises(NonFiniteError, training.LabeledDataset, [[np.inf]], [0])
        self._setStatus(unknown and noEmbeddings and badLabels and nonFinite)

    #--------------------------------------------------------------------------------------------------------
    # Phantom embeddings and metric learning

    def _phantomProblem(self, seed = 0):
        data=_toyData(numClasses = 4, featureDim = 4, perClass = 2, spread = 0.05, scale = 3.0, seed = seed)
        rng=np.random.default_rng(seed)
        directions=rng.standard_normal((4, 3))
        directions=directions/np.linalg.norm(directions, axis = 1)[:, np.newaxis]
        seen=semantics.EmbeddingTable(['a', 'b', 'c', 'd'], directions*np.array([2.0, 0.5, 2.0, 0.5])[:, np.newaxis])
        return data, seen


    def check_phantom_gradient(self, numTrials = 10, tolerance = 1e-4):
        rng=np.random.default_rng(31)
        worst=0.0
        for trial in range(int(numTrials)):
            S, R, D, d=rng.integers(2, 5), rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 4)
            N=int(rng.integers(S, 15))
            labels=np.concatenate([np.arange(S), rng.integers(0, S, N-S)])
            data=training.LabeledDataset(rng.standard_normal((N, D)), labels)
            seen=semantics.EmbeddingTable(["c%d" % (i) for i in range(S)], rng.standard_normal((S, d)))
            V=0.5*rng.standard_normal((R, D))
            beta=rng.standard_normal((R, S))
            metric=semantics.ScaledIdentityMetric(rng.uniform(0.8, 2.0))
            lam, gamma, h=rng.uniform(0.1, 1.0), rng.uniform(0, 1.0), rng.uniform(0.5, 1.5)
            analytic=adaptation.phantomGradient(V, beta, data, seen, metric, lam, gamma, h)
            numeric=_numericalGradient(lambda bb: adaptation.phantomObjective(V, bb, data, seen, metric, lam, 0.0, gamma, h), beta)
            worst=max(worst, _relativeError(analytic, numeric))
        self._setStatus(worst <= float(tolerance), "worst relative gradient error = %.3e" % (worst))


    def check_beta_sparsity(self):
        data, seen=self._phantomProblem(seed = 2)
        config=adaptation.PhantomConfig(eta = 1e3, gamma = 0.0, outerRounds = 2, init = 'identity')
        bases, beta=adaptation.learnPhantomEmbeddings(data, seen, config, training.TrainConfig(lam = 1.0, maxIters = 500))
        fraction=float(np.mean(abs(beta.coeffs) < 1e-6))
        self._setStatus(fraction >= 0.9, "fraction of zero beta entries = %.3f" % (fraction))


    def check_soft_threshold_optimality(self, tolerance = 1e-6):
        """At the beta returned by the proximal solver, the smooth gradient must lie in -eta times the
        subdifferential of |beta|.

        """
        data, seen=self._phantomProblem(seed = 3)
        rng=np.random.default_rng(3)
        V=0.5*rng.standard_normal((4, data.featureDim))
        metric=semantics.ScaledIdentityMetric(1.5)
        lam, eta, gamma, h=0.1, 0.05, 0.1, 1.0
        config=training.TrainConfig(lam = lam, maxIters = 100000, gradTol = 1e-9)
        coeffs, info=adaptation.betaStep(V, np.eye(4), data, seen, metric, lam, eta, gamma, h, config)
        g=adaptation.phantomGradient(V, coeffs, data, seen, metric, lam, gamma, h)
        zero=(coeffs == 0)
        zeroExcess=float(np.max(abs(g[zero])-eta, initial = 0.0))
        activeError=float(np.max(abs(g[~zero]+eta*np.sign(coeffs[~zero])), initial = 0.0))
        print("... %d of %d entries are zero, stop reason '%s' after %d iterations"
              % (zero.sum(), zero.size, info['stopReason'], info['iterations']))
        self._setStatus(info['stopReason'] != 'maxIters' and zeroExcess <= float(tolerance)
                        and activeError <= float(tolerance),
                        "zero-entry excess = %.3e, active-entry error = %.3e" % (zeroExcess, activeError))


    def check_phantom_norm_penalty(self):
        data, seen=self._phantomProblem(seed = 4)
        config=adaptation.PhantomConfig(eta = 0.0, gamma = 1e3, h = 1.0, outerRounds = 2, init = 'identity')
        trainConfig=training.TrainConfig(lam = 1e-2, maxIters = 20000, gradTol = 1e-9)
        bases, beta=adaptation.learnPhantomEmbeddings(data, seen, config, trainConfig)
        norms=np.linalg.norm(adaptation.phantomEmbeddingsFromBeta(beta, seen).vectors, axis = 1)
        self._setStatus(np.all(abs(norms-1.0) <= 1e-2), "phantom norms = %s" % (np.array2string(norms, precision = 4)))


    def check_alternation_is_monotone(self):
        spec=datasets.SyntheticSpec(S = 6, U = 2, D = 6, d = 4, samplesPerClass = 10, noiseStd = 0.05, seed = 1)
        data, unseenData, seen, unseen=datasets.generateSynthetic(spec)
        config=adaptation.PhantomConfig(eta = 0.01, gamma = 0.1, outerRounds = 4, init = 'identity')
        bases, beta=adaptation.learnPhantomEmbeddings(data, seen, config, training.TrainConfig(lam = 0.1, maxIters = 500))
        history=np.array(beta.objectiveHistory)
        increases=np.diff(history)
        print("... objective history: %s" % (np.array2string(history, precision = 6)))
        self._setStatus(len(history) == 4 and np.all(increases <= 1e-8*np.maximum(1.0, abs(history[:-1]))))


    def check_single_round_is_plain_training(self):
        data, seen=self._phantomProblem(seed = 6)
        trainConfig=training.TrainConfig(lam = 0.5, maxIters = 300)
        metric=semantics.ScaledIdentityMetric(1.0)
        bases, beta=adaptation.learnPhantomEmbeddings(data, seen, adaptation.PhantomConfig(outerRounds = 1), trainConfig,
                                                      metric = metric)
        plain=training.trainBaseClassifiers(data, semantics.similarityWeights(seen, seen, metric), 'ovo', trainConfig)
        self._setStatus(np.allclose(bases.vectors, plain.vectors, rtol = 0, atol = 1e-12)
                        and np.array_equal(beta.coeffs, np.eye(4)))


    def check_init_strategies(self):
        rng=np.random.default_rng(8)
        seen=semantics.normalizeEmbeddings(semantics.EmbeddingTable(["c%d" % (i) for i in range(8)], rng.standard_normal((8, 5))))
        identityBad=_raises(IncompatibleStrategyError, adaptation.initPhantoms, 'identity', seen, 6)
        kmeansBad=_raises(IncompatibleStrategyError, adaptation.initPhantoms, 'kmeans', seen, 9)
        mixedBad=_raises(IncompatibleStrategyError, adaptation.initPhantoms, 'mixed', seen, 7)
        unknown=_raises(IncompatibleStrategyError, adaptation.initPhantoms, 'spectral', seen, 8)
        kmeans=adaptation.initPhantoms('kmeans', seen, 3, seed = 1)
        kmeansNorms=np.linalg.norm(adaptation.phantomEmbeddingsFromBeta(kmeans, seen).vectors, axis = 1)
        subset=adaptation.initPhantoms('randomSubset', seen, 5, seed = 1).coeffs
        oneHot=np.all(subset.sum(axis = 1) == 1) and np.all(subset.max(axis = 0) <= 1) and np.all((subset == 0) | (subset == 1))
        mixed=adaptation.initPhantoms('mixed', seen, 12, seed = 1).coeffs
        mixedNorms=np.linalg.norm(np.dot(mixed[8:], seen.vectors), axis = 1)
        auto=[adaptation.initPhantoms('auto', seen, R, seed = 1).numPhantoms for R in [3, 8, 12]]
        reproducible=np.array_equal(adaptation.initPhantoms('kmeans', seen, 3, seed = 1).coeffs, kmeans.coeffs)
        self._setStatus(identityBad and kmeansBad and mixedBad and unknown and np.allclose(kmeansNorms, 1.0)
                        and oneHot and np.array_equal(mixed[:8], np.eye(8)) and np.allclose(mixedNorms, 1.0)
                        and auto == [3, 8, 12] and reproducible)


    def check_kmeans_pairs(self):
        seen=semantics.EmbeddingTable(['a', 'b', 'c', 'd'], [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        coeffs=adaptation.initPhantoms('kmeans', seen, 2, seed = 0).coeffs
        rows=sorted([list(np.round(row, 12)) for row in coeffs])
        self._setStatus(rows == [[0.0, 0.0, 0.5, 0.5], [0.5, 0.5, 0.0, 0.0]], "beta rows = %s" % (rows))


    def check_metric_examples(self):
        data, seen=self._phantomProblem(seed = 9)
        rng=np.random.default_rng(9)
        V=rng.standard_normal((4, 4))
        m=np.array([0.5, 1.5, 2.0])
        # No data and lambda = 0 leaves only the anchoring penalty
        value=adaptation.metricObjective(m, V, None, seen, seen, 0.0, 3.0, 1.0)
        frobenius=abs(value-0.5*3.0*np.sum((m-1.0)**2)) < 1e-12
        # A huge anchoring weight pins the metric to sigma0
        config=training.TrainConfig(lam = 0.1, maxIters = 500)
        mHuge, info=adaptation.metricStep(np.full(3, 1.5), V, data, seen, seen, 0.1, 1e8, 1.0, config)
        pinned=np.all(abs(mHuge-1.0) <= 1e-3)
        # With no outer rounds the starting metric is returned
        metricConfig=adaptation.MetricLearnConfig(gammaM = 1.0, sigma0 = 0.7, folds = 2, outerRounds = 0)
        metric, bases=adaptation.learnMetric(data, seen, seen, metricConfig, config, seed = 0)
        unchanged=np.allclose(metric.m, 0.7) and bases.trainInfo['metricSteps'] == []
        needsRS=_raises(IncompatibleStrategyError, adaptation.learnMetric, data, seen, seen.take([0, 1]), metricConfig, config)
        print("... m after huge gammaM = %s" % (np.array2string(mHuge, precision = 6)))
        self._setStatus(frobenius and pinned and unchanged and needsRS)


    def check_metric_gradient(self, numTrials = 10, tolerance = 1e-4):
        rng=np.random.default_rng(41)
        worst=0.0
        for trial in range(int(numTrials)):
            S, D, d=rng.integers(2, 5), rng.integers(1, 5), rng.integers(1, 4)
            N=int(rng.integers(S, 15))
            labels=np.concatenate([np.arange(S), rng.integers(0, S, N-S)])
            data=training.LabeledDataset(rng.standard_normal((N, D)), labels)
            ids=["c%d" % (i) for i in range(S)]
            seen=semantics.EmbeddingTable(ids, rng.standard_normal((S, d)))
            phantom=semantics.EmbeddingTable(ids, rng.standard_normal((S, d)))
            V=0.5*rng.standard_normal((S, D))
            m=rng.uniform(0.5, 1.5, d)
            lam, gammaM=rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)
            analytic=adaptation.metricGradient(m, V, data, seen, phantom, lam, gammaM, 1.0)
            numeric=_numericalGradient(lambda mm: adaptation.metricObjective(mm, V, data, seen, phantom, lam, gammaM, 1.0), m)
            worst=max(worst, _relativeError(analytic, numeric))
        self._setStatus(worst <= float(tolerance), "worst relative gradient error = %.3e" % (worst))


    def check_metric_learning_runs(self):
        spec=datasets.SyntheticSpec(S = 8, U = 3, D = 6, d = 4, samplesPerClass = 12, noiseStd = 0.05, seed = 3)
        data, unseenData, seen, unseen=datasets.generateSynthetic(spec)
        metricConfig=adaptation.MetricLearnConfig(gammaM = 1.0, sigma0 = 1.0, folds = 3, outerRounds = 2)
        metric, bases=adaptation.learnMetric(data, seen, seen, metricConfig, training.TrainConfig(lam = 0.1, maxIters = 200),
                                             seed = 5)
        steps=bases.trainInfo['metricSteps']
        decreased=all(after <= before+1e-9*max(1.0, abs(before)) for before, after in steps)
        self._setStatus(len(steps) == 2 and decreased and np.all(np.isfinite(metric.m)) and metric.dim == 4)


    def check_planted_noise_metric(self, noiseStd = 0.25, maxRatio = 1.0):
        """Six seen classes evenly spread on a circle in two informative attribute dimensions, plus a third
        attribute that is pure noise. Features mix the informative attributes with a class-specific
        direction, so classes close on the circle have similar classifiers. The M-step gains most by
        sharpening along dimensions that separate classes with different classifiers, so the learned
        weight of the noise attribute ends up below that of the informative ones.

        Note:
            This holds while the noise spread is small next to the informative spacing of neighbouring
            seen classes. With many seen classes crowded in the informative dimensions, a noise attribute
            of equal spread separates neighbours as well as any informative one, and its weight need not
            shrink.

        """
        rng=np.random.default_rng(23)
        S=6
        angles=np.radians(60.0*np.arange(S)+15.0)
        informative=np.stack([np.cos(angles), np.sin(angles)], axis = 1)
        noise=float(noiseStd)*rng.standard_normal((S, 1))
        classIds=["c%d" % (i) for i in range(S)]
        seen=semantics.EmbeddingTable(classIds, np.concatenate([informative, noise], axis = 1))
        means=np.concatenate([informative, 0.8*np.eye(S)], axis = 1)
        means=means/np.linalg.norm(means, axis = 1)[:, np.newaxis]
        labels=np.repeat(np.arange(S), 30)
        features=means[labels]+0.05*rng.standard_normal((labels.shape[0], means.shape[1]))
        data=training.LabeledDataset(features, labels, classIds = classIds)
        metricConfig=adaptation.MetricLearnConfig(gammaM = 0.01, sigma0 = 1.5, folds = 5, outerRounds = 3)
        metric, bases=adaptation.learnMetric(data, seen, seen, metricConfig,
                                             training.TrainConfig(lam = 0.1, maxIters = 2000), seed = 0)
        m=abs(metric.m)
        ratio=m[2]/np.mean(m[:2])
        print("... learned m = %s, noise / informative ratio = %.4f" % (np.array2string(m, precision = 4), ratio))
        self._setStatus(ratio < float(maxRatio), "noise / informative ratio = %.4f" % (ratio))

    #--------------------------------------------------------------------------------------------------------
    # Cross validation

    def check_fold_plan_examples(self):
        labels=np.repeat(np.arange(6), 4)
        plan=tuning.makeFolds(labels, 3, 'classWise', 0)
        classesPerFold=[np.unique(labels[v]).shape[0] for t, v in plan.folds]
        tooFew=_raises(InvalidFoldsError, tuning.makeFolds, labels, 1, 'classWise', 0)
        tooManyFolds=_raises(TooFewClassesError, tuning.makeFolds, labels, 7, 'classWise', 0)
        sampleLabels=np.repeat(np.arange(2), 10)
        samplePlan=tuning.makeFolds(sampleLabels, 2, 'sampleWise', 0)
        perClass=[list(np.bincount(sampleLabels[v], minlength = 2)) for t, v in samplePlan.folds]
        overlap=_raises(InvalidFoldsError, tuning.FoldPlan, 'classWise', [([0, 1], [1, 2]), ([2], [0, 1])])
        print("... classes per class-wise fold: %s, samples per class per sample-wise fold: %s" % (classesPerFold, perClass))
        self._setStatus(classesPerFold == [2, 2, 2] and tooFew and tooManyFolds and perClass == [[5, 5], [5, 5]]
                        and overlap)


    def check_class_wise_folds_disjoint(self, numTrials = 100):
        rng=np.random.default_rng(55)
        passed=True
        for trial in range(int(numTrials)):
            numClasses=int(rng.integers(3, 13))
            labels=np.repeat(np.arange(numClasses), rng.integers(1, 6, numClasses))
            rng.shuffle(labels)
            k=int(rng.integers(2, min(numClasses, 5)+1))
            plan=tuning.makeFolds(labels, k, 'classWise', int(rng.integers(0, 1000)))
            seenClasses=set()
            for t, v in plan.folds:
                valClasses=set(np.unique(labels[v]))
                if len(valClasses.intersection(np.unique(labels[t]))) > 0 or len(valClasses.intersection(seenClasses)) > 0:
                    passed=False
                seenClasses.update(valClasses)
            if seenClasses != set(range(numClasses)):
                passed=False
        self._setStatus(passed)


    def check_forced_cv_choice(self):
        rng=np.random.default_rng(12)
        labels=np.repeat(np.arange(2), 10)
        means=np.array([[1.0, 0.0], [3.0, 0.5]])
        data=training.LabeledDataset(means[labels]+0.01*rng.standard_normal((20, 2)), labels, classIds = ['A', 'B'])
        seen=semantics.EmbeddingTable(['A', 'B'], [[1.0, 0.0], [0.0, 1.0]])
        grid=tuning.HyperGrid(lambdaValues = [1e6, 1e-2], sigmaValues = [0.1])
        plan=tuning.makeFolds(labels, 2, 'sampleWise', 0)
        result=tuning.crossValidate(data, seen, grid, plan, 'ovo', 'lambdaSigma',
                                    trainConfig = training.TrainConfig(maxIters = 5000), numThreads = 1)
        print("... mean scores = %s, best = %s" % (np.array2string(result.meanScores, precision = 4), result.best))
        self._setStatus(result.best['lambda'] == 1e-2 and abs(result.bestScore-1.0) < 1e-12)


    def check_cv_cell_failure(self):
        """A cell that dies with a numerical (non-package) error is scored -inf and the search goes on."""
        rng=np.random.default_rng(12)
        labels=np.repeat(np.arange(2), 10)
        means=np.array([[1.0, 0.0], [3.0, 0.5]])
        data=training.LabeledDataset(means[labels]+0.01*rng.standard_normal((20, 2)), labels, classIds = ['A', 'B'])
        seen=semantics.EmbeddingTable(['A', 'B'], [[1.0, 0.0], [0.0, 1.0]])
        grid=tuning.HyperGrid(lambdaValues = [1e-2, 1e-1], sigmaValues = [0.1])
        plan=tuning.makeFolds(labels, 2, 'sampleWise', 0)
        scoreFold=tuning.scoreFold

        def singularCell(data, seen, cell, *args, **kwargs):
            if cell['lambda'] == 1e-2:
                raise np.linalg.LinAlgError("Singular matrix")
            return scoreFold(data, seen, cell, *args, **kwargs)

        tuning.scoreFold=singularCell
        try:
            result=tuning.crossValidate(data, seen, grid, plan, 'ovo', 'lambdaSigma',
                                        trainConfig = training.TrainConfig(maxIters = 5000), numThreads = 1)
        finally:
            tuning.scoreFold=scoreFold
        print("... mean scores = %s, failures = %s" % (np.array2string(result.meanScores, precision = 4), result.failed))
        self._setStatus(np.isneginf(result.meanScores[0]) and result.failed[0].startswith('LinAlgError')
                        and result.failed[1] is None and result.best['lambda'] == 1e-1)


    def check_planted_sigma_choice(self):
        """Anchor classes at 0, 120 and 240 degrees on the unit circle, and classes 20 degrees either side of
        each anchor. With a tiny sigma, both neighbours of an anchor get the anchor's classifier, so they
        can't be told apart; a wider sigma separates them.

        """
        anchors=[0.0, 120.0, 240.0]
        angles=anchors+[a+20 for a in anchors]+[a-20 for a in anchors]
        classIds=["c%d" % (i) for i in range(len(angles))]
        seen=_circleTable(classIds, angles)
        rng=np.random.default_rng(21)
        labels=np.repeat(np.arange(len(angles)), 20)
        features=3*seen.vectors[labels]+0.05*rng.standard_normal((labels.shape[0], 2))
        data=training.LabeledDataset(features, labels, classIds = classIds)
        anchorIdx=np.where(labels < 3)[0]
        sideIdx=np.where(labels >= 3)[0]
        plan=tuning.FoldPlan('classWise', [(anchorIdx, sideIdx), (sideIdx, anchorIdx)], labels = labels)
        grid=tuning.HyperGrid(lambdaValues = [1e-2], sigmaValues = [1e-3, 0.5])
        result=tuning.crossValidate(data, seen, grid, plan, 'ovo', 'lambdaSigma',
                                    trainConfig = training.TrainConfig(maxIters = 3000), numThreads = 1)
        print("... mean scores = %s, best = %s" % (np.array2string(result.meanScores, precision = 4), result.best))
        self._setStatus(result.best['sigma'] == 0.5 and result.meanScores[1] > result.meanScores[0])


    def check_class_wise_beats_sample_wise(self):
        """Same planted toy as :meth:`check_planted_sigma_choice`, scored with both fold modes from
        :func:`tuning.makeFolds`. Sample-wise folds train on every class, and with the regularizer on the
        synthesized classifiers the fitted models do not depend on sigma, so the sigma cells tie and the
        first (tiny) one is kept. Class-wise folds hold out anchors or sides and reward the wider sigma.

        """
        anchors=[0.0, 120.0, 240.0]
        angles=anchors+[a+20 for a in anchors]+[a-20 for a in anchors]
        classIds=["c%d" % (i) for i in range(len(angles))]
        seen=_circleTable(classIds, angles)
        rng=np.random.default_rng(21)
        labels=np.repeat(np.arange(len(angles)), 20)
        features=3*seen.vectors[labels]+0.05*rng.standard_normal((labels.shape[0], 2))
        data=training.LabeledDataset(features, labels, classIds = classIds)
        grid=tuning.HyperGrid(lambdaValues = [1e-2], sigmaValues = [1e-3, 0.5])
        trainConfig=training.TrainConfig(maxIters = 20000, gradTol = 1e-9)
        choices={}
        for mode in ['sampleWise', 'classWise']:
            if mode == 'sampleWise':
                plan=tuning.makeFolds(labels, 2, 'sampleWise', 5)
            else:
                # Class-wise split over the anchor and side groups, bound back to the class labels
                groups=tuning.makeFolds((labels >= 3).astype(int), 2, 'classWise', 5)
                plan=tuning.FoldPlan('classWise', groups.folds, labels = labels)
            result=tuning.crossValidate(data, seen, grid, plan, 'ovo', 'lambdaSigma', trainConfig = trainConfig,
                                        numThreads = 1)
            choices[mode]=result
            print("... %s: mean scores = %s, best sigma = %g" % (mode, np.array2string(result.meanScores, precision = 4),
                                                                 result.best['sigma']))
        sampleWise, classWise=choices['sampleWise'], choices['classWise']
        self._setStatus(sampleWise.best['sigma'] == 1e-3 and classWise.best['sigma'] == 0.5
                        and sampleWise.meanScores[0] >= sampleWise.meanScores[1]
                        and classWise.meanScores[1] > classWise.meanScores[0])


    def check_cv_results_table(self):
        data=_toyData(numClasses = 4, featureDim = 3, perClass = 6, seed = 8)
        seen=semantics.EmbeddingTable(['a', 'b', 'c', 'd'], np.eye(4)[:, :3]+0.1)
        grid=tuning.HyperGrid(lambdaValues = [0.1, 1.0], sigmaValues = [0.5, 1.0, 2.0])
        plan=tuning.makeFolds(data.labels, 2, 'classWise', 3)
        result=tuning.crossValidate(data, seen, grid, plan, 'ovo', 'lambdaSigma',
                                    trainConfig = training.TrainConfig(maxIters = 200), numThreads = 2)
        tab=result.toTable()
        outFileName=self.cacheDir+os.path.sep+"cvTable.csv"
        result.write(outFileName)
        tuning.makeCVGridPlot(result, self.plotsDir+os.path.sep+"cvGrid.png")
        empty=_raises(InvalidSpecError, tuning.HyperGrid(lambdaValues = [1.0]).cells, 'lambdaSigma')
        self._setStatus(len(tab) == 6 and list(tab['lambda'][:3]) == [0.1, 0.1, 0.1] and os.path.exists(outFileName)
                        and result.bestIndex == int(np.argmax(result.meanScores)) and empty)

    #--------------------------------------------------------------------------------------------------------
    # ConSE

    def check_conse_embedding_example(self):
        clf=conse.ProbabilisticClassifierSet(np.zeros((2, 1)), np.log([0.6, 0.4]))
        seen=semantics.EmbeddingTable(['s1', 's2'], [[1.0, 0.0], [0.0, 1.0]])
        embedded=conse.conseEmbed(np.array([0.0]), clf, seen, 2)
        tooBig=_raises(KTooLargeError, conse.conseEmbed, np.array([0.0]), clf, seen, 3)
        opposite=semantics.EmbeddingTable(['s1', 's2'], [[1.0, 0.0], [-1.0, 0.0]])
        flat=conse.ProbabilisticClassifierSet(np.zeros((2, 1)), np.zeros(2))
        unseen=semantics.EmbeddingTable(['u1', 'u2'], [[1.0, 0.0], [0.0, 1.0]])
        zero=_raises(ZeroVectorError, conse.consePredict, np.array([0.0]), flat, opposite, unseen, 2, 1)
        print("... embedding = %s" % (np.array2string(embedded, precision = 6)))
        self._setStatus(np.allclose(embedded, [0.6, 0.4], atol = 1e-12) and tooBig and zero)


    def check_conse_bias_shift(self, numTrials = 100):
        rng=np.random.default_rng(62)
        worst=0.0
        for trial in range(int(numTrials)):
            S, D, d=rng.integers(2, 9), rng.integers(1, 6), rng.integers(2, 6)
            W=rng.standard_normal((S, D))
            b=rng.standard_normal(S)
            seen=semantics.EmbeddingTable(["s%d" % (i) for i in range(S)], rng.standard_normal((S, d)))
            x=rng.standard_normal(D)
            T=int(rng.integers(1, S+1))
            shifted=conse.ProbabilisticClassifierSet(W, b+rng.uniform(-20, 20))
            diff=conse.conseEmbed(x, shifted, seen, T)-conse.conseEmbed(x, conse.ProbabilisticClassifierSet(W, b), seen, T)
            worst=max(worst, float(np.max(abs(diff))))
        self._setStatus(worst < 1e-12, "largest change from a bias shift = %.3e" % (worst))


    def check_conse_top1_is_nearest(self, numTrials = 100):
        rng=np.random.default_rng(61)
        passed=True
        for trial in range(int(numTrials)):
            S, U, D, d=rng.integers(2, 9), rng.integers(2, 7), rng.integers(1, 6), rng.integers(2, 6)
            clf=conse.ProbabilisticClassifierSet(rng.standard_normal((S, D)), rng.standard_normal(S))
            seen=semantics.EmbeddingTable(["s%d" % (i) for i in range(S)], rng.standard_normal((S, d)))
            unseen=semantics.EmbeddingTable(["u%d" % (i) for i in range(U)], rng.standard_normal((U, d)))
            x=rng.standard_normal(D)
            top=int(np.argmax(clf.probabilities(x)[0]))
            a=seen.vectors[top]
            cosines=np.dot(unseen.vectors, a)/(np.linalg.norm(unseen.vectors, axis = 1)*np.linalg.norm(a))
            expected=unseen.classIds[int(np.argmax(cosines))]
            if conse.consePredict(x, clf, seen, unseen, 1, 1)[0] != expected:
                passed=False
        self._setStatus(passed)


    def check_logistic_gradient(self, numTrials = 20, tolerance = 1e-5):
        rng=np.random.default_rng(71)
        worst=0.0
        for trial in range(int(numTrials)):
            S, D=rng.integers(2, 6), rng.integers(1, 6)
            N=int(rng.integers(S, 25))
            labels=np.concatenate([np.arange(S), rng.integers(0, S, N-S)])
            data=training.LabeledDataset(rng.standard_normal((N, D)), labels)
            params=rng.standard_normal((S, D+1))
            l2Reg=rng.uniform(0, 2)
            analytic=conse.logisticGradient(params, data, l2Reg)
            numeric=_numericalGradient(lambda pp: conse.logisticObjective(pp, data, l2Reg), params)
            worst=max(worst, _relativeError(analytic, numeric))
        self._setStatus(worst <= float(tolerance), "worst relative gradient error = %.3e" % (worst))


    def check_separable_logistic(self):
        rng=np.random.default_rng(17)
        labels=np.repeat(np.arange(2), 10)
        means=np.array([[2.0, 0.0], [-2.0, 0.0]])
        data=training.LabeledDataset(means[labels]+0.3*rng.standard_normal((20, 2)), labels)
        clf=conse.trainSeenProbabilistic(data, 1e-2, training.TrainConfig(maxIters = 2000))
        trainAccuracy=float(np.mean(np.argmax(clf.probabilities(data.features), axis = 1) == labels))
        atMeans=clf.probabilities(means)[[0, 1], [0, 1]]
        label="training accuracy = %.3f, probabilities at class means = %s" % (trainAccuracy, np.array2string(atMeans, precision = 4))
        self._setStatus(trainAccuracy == 1.0 and np.all(atMeans >= 0.9), label)


    def check_heavy_regularization_is_uniform(self):
        data=_toyData(numClasses = 3, featureDim = 4, perClass = 10, seed = 14)
        clf=conse.trainSeenProbabilistic(data, 1e6, training.TrainConfig(maxIters = 2000))
        probs=clf.probabilities(data.features)
        spread=float(np.max(probs.max(axis = 1)-probs.min(axis = 1)))
        tooFew=_raises(TooFewClassesError, conse.trainSeenProbabilistic, data.selectClasses([0]), 1.0)
        self._setStatus(spread < 1e-3 and tooFew, "max probability spread = %.3e" % (spread))

    #--------------------------------------------------------------------------------------------------------
    # Evaluation

    def _chain(self, validLabels = None):
        return evaluation.Hierarchy(['a', 'b', 'c'], [('a', 'b'), ('b', 'c')], validLabels = validLabels)


    def check_per_class_accuracy_examples(self):
        truths=['A']*98+['B']*2
        predictions=['A']*100
        skewed=evaluation.perClassAccuracy(predictions, truths, ['A', 'B'])
        mixed=evaluation.perClassAccuracy(['A', 'B', 'B'], ['A', 'A', 'B'], ['A', 'B'])
        empty=_raises(EmptyEvaluationError, evaluation.perClassAccuracy, [], [], ['A'])
        outside=_raises(InvalidLabelError, evaluation.perClassAccuracy, ['A'], ['C'], ['A', 'B'])
        print("... skewed = %.4f, mixed = %.4f" % (skewed, mixed))
        self._setStatus(abs(skewed-0.5) < 1e-12 and abs(mixed-0.75) < 1e-12 and empty and outside)


    def check_hierarchy_examples(self):
        h=self._chain()
        k1=evaluation.hCorrectSet(h, 'b', 1)
        k2=evaluation.hCorrectSet(h, 'b', 2)
        restricted=evaluation.hCorrectSet(self._chain(validLabels = ['a', 'c']), 'b', 1)
        unreachable=_raises(UnreachableError, evaluation.hCorrectSet, h, 'a', 5)
        unknown=_raises(HierarchyError, evaluation.hCorrectSet, h, 'z', 1)
        badK=_raises(KTooLargeError, evaluation.hCorrectSet, h, 'a', 0)
        precision=evaluation.hierarchicalPrecisionAtK([['a', 'd']], ['b'], h, 2)
        print("... K = 1: %s, K = 2: %s, restricted: %s, HP@2 = %.3f" % (sorted(k1), sorted(k2), sorted(restricted), precision))
        self._setStatus(k1 == {'b'} and k2 == {'a', 'b', 'c'} and restricted == {'a', 'c'} and unreachable and unknown
                        and badK and abs(precision-0.5) < 1e-12)


    def check_isolated_valid_label(self):
        hierarchyName=self._writeText("hierarchyIsolated.txt", "animal\tcat\nanimal\tdog\n")
        validName=self._writeText("validIsolated.txt", "cat\ndog\nfish\n")
        h=evaluation.loadHierarchy(hierarchyName, validName)
        alone=evaluation.hCorrectSet(h, 'fish', 1)
        stranded=_raises(UnreachableError, evaluation.hCorrectSet, h, 'fish', 2)
        print("... nodes = %s, neighbourhood of fish = %s" % (h.nodes, sorted(alone)))
        self._setStatus('fish' in h.nodes and alone == {'fish'} and stranded
                        and evaluation.hCorrectSet(h, 'cat', 2) == {'cat', 'dog'})


    def check_hierarchy_against_bfs(self, numTrials = 100, maxNodes = 40, maxK = 10):
        rng=np.random.default_rng(81)
        passed=True
        for trial in range(int(numTrials)):
            numNodes=int(rng.integers(2, int(maxNodes)+1))
            nodes=["n%d" % (i) for i in range(numNodes)]
            edges=[]
            for i in range(1, numNodes):
                if rng.random() < 0.9:
                    numParents=int(rng.integers(1, min(i, 2)+1))
                    for p in rng.choice(i, size = numParents, replace = False):
                        edges.append((nodes[int(p)], nodes[i]))
            valid=[n for n in nodes if rng.random() < 0.7]
            if len(valid) == 0:
                valid=[nodes[0]]
            h=evaluation.Hierarchy(nodes, edges, validLabels = valid)
            adjacency={n: set() for n in nodes}
            for p, c in edges:
                adjacency[p].add(c)
                adjacency[c].add(p)
            for start in nodes:
                dist={start: 0}
                queue=collections.deque([start])
                while len(queue) > 0:
                    n=queue.popleft()
                    for m in adjacency[n]:
                        if m not in dist.keys():
                            dist[m]=dist[n]+1
                            queue.append(m)
                reachableValid=[n for n in dist.keys() if n in valid]
                for K in range(1, int(maxK)+1):
                    if K > len(reachableValid):
                        if _raises(UnreachableError, evaluation.hCorrectSet, h, start, K) == False:
                            passed=False
                        continue
                    expected=set()
                    for radius in range(0, max(dist.values())+1):
                        expected.update(n for n in reachableValid if dist[n] == radius)
                        if len(expected) >= K:
                            break
                    if evaluation.hCorrectSet(h, start, K) != expected:
                        print("... trial %d: mismatch for node %s, K = %d" % (trial, start, K))
                        passed=False
        self._setStatus(passed)


    def check_flat_hit_properties(self, numTrials = 50):
        rng=np.random.default_rng(91)
        classes=["c%d" % (i) for i in range(6)]
        passed=True
        for trial in range(int(numTrials)):
            N=int(rng.integers(1, 30))
            truths=[classes[i] for i in rng.integers(0, 6, N)]
            rankings=[list(rng.permutation(classes)) for n in range(N)]
            hits=[evaluation.flatHitAtK(rankings, truths, K) for K in range(1, 7)]
            top1=sum([rankings[n][0] == truths[n] for n in range(N)])/N
            if hits[0] != top1 or np.any(np.diff(hits) < 0) or hits[-1] != 1.0:
                passed=False
        tooLong=_raises(KTooLargeError, evaluation.flatHitAtK, [['a', 'b']], ['a'], 3)
        self._setStatus(passed and tooLong)


    def check_eval_report(self):
        rankings=[['a', 'c'], ['c', 'a'], ['c', 'b']]
        truths=['a', 'c', 'b']
        report=evaluation.evaluateRankings(rankings, truths, ['a', 'b', 'c'], [1, 2, 5], hierarchy = self._chain())
        tab=report.toTable()
        outFileName=self.cacheDir+os.path.sep+"evalReport.csv"
        report.write(outFileName)
        outOfRange=_raises(NumericError, evaluation.EvalReport, 1.5)
        print("... per-class accuracy = %.4f, flat hits = %s" % (report.perClassAccuracy, report.flatHits))
        self._setStatus(abs(report.perClassAccuracy-2.0/3) < 1e-12 and sorted(report.flatHits.keys()) == [1, 2]
                        and report.flatHits[2] == 1.0 and len(tab) == 5 and os.path.exists(outFileName)
                        and report.counts == {'a': 1, 'c': 1, 'b': 1} and outOfRange)


    def check_components_for_variance(self):
        rng=np.random.default_rng(4)
        vectors=np.dot(rng.standard_normal((30, 2)), rng.standard_normal((2, 10)))
        n, explained=evaluation.componentsForVariance(vectors, 0.95)
        self._setStatus(1 <= n <= 2 and abs(np.sum(explained)-1) < 1e-9, "components for 95%% of variance = %d" % (n))

    #--------------------------------------------------------------------------------------------------------
    # File formats and synthetic data

    def _writeText(self, name, text):
        fileName=self.cacheDir+os.path.sep+name
        with open(fileName, "w") as outFile:
            outFile.write(text)
        return fileName


    def check_matrix_file_examples(self):
        good=datasets.loadMatrix(self._writeText("good.txt", "2 2\n1 2\n3 4\n"))
        try:
            datasets.loadMatrix(self._writeText("ragged.txt", "2 2\n1 2\n3\n"))
            ragged=False
        except ParseError as e:
            ragged=(e.line == 3)
        try:
            datasets.loadMatrix(self._writeText("token.txt", "1 2\n1 x\n"))
            token=False
        except ParseError as e:
            token=(e.line == 2 and e.column == 3)
        nonFinite=_raises(NonFiniteError, datasets.loadMatrix, self._writeText("nan.txt", "1 1\nnan\n"))
        missing=_raises(DataIOError, datasets.loadMatrix, self.cacheDir+os.path.sep+"doesNotExist.txt")
        rng=np.random.default_rng(0)
        matrix=rng.standard_normal((5, 3))*10**rng.uniform(-5, 5, (5, 3))
        fileName=self.cacheDir+os.path.sep+"roundTrip.txt"
        datasets.saveMatrix(fileName, matrix)
        exact=np.array_equal(datasets.loadMatrix(fileName), matrix)
        self._setStatus(np.array_equal(good, [[1, 2], [3, 4]]) and ragged and token and nonFinite and missing and exact)


    def check_text_file_examples(self):
        table=semantics.EmbeddingTable(['cat', 'dog'], [[0.1, 0.2], [0.3, 0.4]])
        fileName=self.cacheDir+os.path.sep+"embeddings.txt"
        datasets.saveEmbeddings(fileName, table)
        loaded=datasets.loadEmbeddings(fileName)
        splitName=self.cacheDir+os.path.sep+"split.txt"
        datasets.saveSplit(splitName, ['cat'], ['dog', 'cow'])
        seenIds, unseenIds=datasets.loadSplit(splitName)
        overlap=_raises(InvalidLabelError, datasets.loadSplit, self._writeText("badSplit.txt", "[seen]\ncat\n[unseen]\ncat\n"))
        hierarchyName=self._writeText("hierarchy.txt", "# parent\tchild\nanimal\tcat\n\nanimal\tdog\n")
        h=evaluation.loadHierarchy(hierarchyName)
        self._setStatus(loaded.classIds == ['cat', 'dog'] and np.array_equal(loaded.vectors, table.vectors)
                        and seenIds == ['cat'] and unseenIds == ['dog', 'cow'] and overlap
                        and evaluation.hCorrectSet(h, 'cat', 2) == {'animal', 'cat'})


    def check_synthetic_data(self):
        spec=datasets.SyntheticSpec(S = 5, U = 3, D = 6, d = 4, samplesPerClass = 10, noiseStd = 0.05, seed = 7)
        first=datasets.generateSynthetic(spec)
        second=datasets.generateSynthetic(spec)
        same=np.array_equal(first[0].features, second[0].features) and np.array_equal(first[3].vectors, second[3].vectors)
        doubled=datasets.generateSynthetic(datasets.SyntheticSpec(S = 5, U = 3, D = 6, d = 4, samplesPerClass = 20,
                                                                  noiseStd = 0.05, seed = 7))
        sizes=(doubled[0].numSamples == 2*first[0].numSamples and doubled[1].numSamples == 2*first[1].numSamples)
        # Without noise, every sample sits on its (normalized) true classifier, which ranks it first
        clean=datasets.SyntheticSpec(S = 5, U = 3, D = 6, d = 4, samplesPerClass = 4, noiseStd = 0.0, seed = 7)
        seenData, unseenData, seen, unseen=datasets.generateSynthetic(clean)
        Wstar=datasets.syntheticTrueClassifiers(clean)
        means=Wstar/np.linalg.norm(Wstar, axis = 1)[:, np.newaxis]
        onMeans=np.allclose(seenData.features, means[seenData.labels], atol = 1e-12)
        unseenModels=synthesis.ClassifierSet(unseenData.classIds, means[clean.S:])
        accuracy=evaluation.perClassAccuracy(synthesis.predictBatch(unseenModels, unseenData.features), unseenData.labels)
        h=datasets.generateSyntheticHierarchy(clean)
        hierarchyOK=(h.numNodes == 2*(clean.S+clean.U)-1 and h.validLabels == set(unseen.classIds))
        badKey=_raises(InvalidSpecError, datasets.SyntheticSpec.fromDict, {'S': 5, 'colour': 'blue'})
        self._setStatus(same and sizes and onMeans and accuracy == 1.0 and hierarchyOK and badKey and seen.normalized)

    #--------------------------------------------------------------------------------------------------------
    # End-to-end runs on synthetic data

    def check_zero_shot_accuracy(self, numSeeds = 5, minAccuracy = 0.95):
        # Calibrated on the default synthetic config: seeds 0-4 all gave unseen per-class accuracy 1.0000
        accuracies=[]
        for seed in range(int(numSeeds)):
            config=self._syntheticConfig("zeroShot_seed%d" % (seed), seed = seed)
            report=pipelines.runZeroShot(config, verbose = False)
            accuracies.append(report.perClassAccuracy)
            print("... seed %d: unseen per-class accuracy = %.4f" % (seed, report.perClassAccuracy))
        plt.figure(figsize = (10, 8))
        plt.plot(np.arange(len(accuracies)), accuracies, 'D')
        plt.axhline(float(minAccuracy), color = 'black', ls = '--')
        plt.xlabel("seed")
        plt.ylabel("unseen per-class accuracy")
        plt.title("synthetic zero-shot accuracy", fontdict = {'size': plotTitleSize})
        plt.savefig(self.plotsDir+os.path.sep+"zeroShotAccuracy.png")
        plt.close()
        self._setStatus(min(accuracies) >= float(minAccuracy))


    def check_beats_conse(self, tolerance = 0.02):
        config=self._syntheticConfig("compareSynC", seed = 0)
        syncReport=pipelines.runZeroShot(config, verbose = False)
        config=self._syntheticConfig("compareConSE", seed = 0)
        conseReport=pipelines.runConSE(config, verbose = False)
        label="SynC accuracy = %.4f, ConSE accuracy = %.4f" % (syncReport.perClassAccuracy, conseReport.perClassAccuracy)
        self._setStatus(syncReport.perClassAccuracy >= conseReport.perClassAccuracy-float(tolerance), label)


    def check_phantom_sweep(self, minRelative = 0.9, maxDrop = 0.05):
        config=self._syntheticConfig("sweep", seed = 0, makePlots = True)
        tab=pipelines.sweepPhantomCount(config, ratios = [0.2, 0.4, 0.6, 0.8, 1.0], verbose = False)
        tab.sort('ratio')
        relative=np.array(tab['relativeAccuracy'])
        atRatio=float(relative[np.where(np.array(tab['ratio']) == 0.6)[0][0]])
        drops=relative[:-1]-relative[1:]
        print("... relative accuracies = %s" % (np.array2string(relative, precision = 4)))
        self._setStatus(atRatio >= float(minRelative) and np.all(drops <= float(maxDrop))
                        and abs(relative[-1]-1.0) < 1e-12 and list(tab['strategy']) == ['kmeans']*4+['identity'])


    def check_single_unseen_class(self):
        config=self._syntheticConfig("singleUnseen", seed = 0, synthetic = {'S': 10, 'U': 1, 'samplesPerClass': 20},
                                     crossValidate = False)
        report=pipelines.runZeroShot(config, verbose = False)
        self._setStatus(report.perClassAccuracy == 1.0 and report.flatHits == {1: 1.0})


    def check_runs_are_deterministic(self):
        reports, digests=[], []
        for name in ["determinism1", "determinism2"]:
            config=self._syntheticConfig(name, seed = 3, synthetic = {'S': 12, 'U': 4, 'samplesPerClass': 20},
                                         phantomOuterRounds = 2, eta = 0.01, gamma = 0.1)
            reports.append(pipelines.runZeroShot(config, verbose = False))
            digests.append({os.path.relpath(p, config.rootOutDir): pipelines._sha256(p) for p in config.outputFiles})
        self._setStatus(reports[0] == reports[1] and digests[0] == digests[1] and len(digests[0]) > 0)


    def check_diagonal_metric_pipeline(self):
        config=self._syntheticConfig("diagonalMetric", seed = 1, synthetic = {'S': 12, 'U': 4, 'samplesPerClass': 20},
                                     crossValidate = False, metric = 'diagonal')
        model=pipelines.runTrain(config, verbose = False)
        weights=datasets.loadMatrix(config.matricesDir+os.path.sep+"metric.txt")
        self._setStatus(isinstance(model.metric, semantics.DiagonalMetric) and weights.shape == (1, 10)
                        and len(model.bases.trainInfo['metricSteps']) == 2)


    def check_stage_errors(self):
        config=self._syntheticConfig("stageError", seed = 0, synthetic = {'S': 6, 'U': 2, 'samplesPerClass': 5},
                                     crossValidate = False, numPhantoms = 4, phantomInit = 'identity')
        try:
            pipelines.runZeroShot(config, verbose = False)
            tagged=False
        except StageError as e:
            tagged=(e.stage == 'phantoms' and isinstance(e.cause, IncompatibleStrategyError))
        self._setStatus(tagged and exitCodeFor(StageError('train', NonFiniteError("x"))) == 3)

    #--------------------------------------------------------------------------------------------------------
    # Command line

    def set_config(self, configFileName):
        """Set the config file to be used by the phantomsync commands executed by tests. Path given here
        can be relative to the current working directory (it gets turned into an absolute path if so).

        """
        self.configFileName=os.path.abspath(configFileName)


    def run_phantomsync(self, command, outputDir, *extraArgs):
        """Runs a phantomsync sub-command on the current config, writing output under the cache dir.

        """
        args=['phantomsync', command, '-c', self.configFileName, '-o', os.path.abspath(self.cacheDir+os.path.sep+outputDir), '-q']
        self._run_command(args+list(extraArgs))


    def rerun_from_manifest(self, outputDir, newOutputDir):
        """Repeats an earlier run, using the manifest it wrote as the config file.

        """
        manifestFileName=os.path.abspath(self.cacheDir+os.path.sep+outputDir+os.path.sep+"manifest.yml")
        with open(manifestFileName, "r") as stream:
            command=yaml.safe_load(stream)['command']
        self._run_command(['phantomsync', command, '-c', manifestFileName, '-o',
                           os.path.abspath(self.cacheDir+os.path.sep+newOutputDir), '-q'])


    def write_synthetic_dataset(self, outputDir, *params):
        args=['phantomsync', 'synth-data', '-o', os.path.abspath(self.cacheDir+os.path.sep+outputDir), '-q']
        for p in params:
            args=args+['-p', p]
        self._run_command(args)


    def evaluate_rankings_file(self, rankingsText, truthsText):
        rankingsFileName=os.path.abspath(self._writeText("rankings.txt", rankingsText))
        truthsFileName=os.path.abspath(self._writeText("truths.txt", truthsText))
        self._run_command(['phantomsync', 'eval', rankingsFileName, truthsFileName, '-K', '1', '-q'])


    def check_manifest_written(self, outputDir):
        manifestFileName=self.cacheDir+os.path.sep+outputDir+os.path.sep+"manifest.yml"
        if os.path.exists(manifestFileName) == False:
            self._setStatus(False, "no manifest in %s" % (outputDir))
            return
        with open(manifestFileName, "r") as stream:
            manifest=yaml.safe_load(stream)
        self._setStatus(manifest['manifestVersion'] == 1 and 'zeroShotReport.csv' in manifest['outputs'].keys()
                        and 'config' in manifest.keys())


    def check_manifest_outputs_match(self, outputDir1, outputDir2):
        outputs=[]
        for outputDir in [outputDir1, outputDir2]:
            with open(self.cacheDir+os.path.sep+outputDir+os.path.sep+"manifest.yml", "r") as stream:
                outputs.append(yaml.safe_load(stream)['outputs'])
        for key in outputs[0].keys():
            if outputs[1].get(key) != outputs[0][key]:
                print("... %s differs between runs" % (key))
        self._setStatus(outputs[0] == outputs[1] and len(outputs[0]) > 0)


    def exit_code_should_be(self, expected):
        if self._lastProcess is None or self._lastProcess.returncode != int(expected):
            returncode=None if self._lastProcess is None else self._lastProcess.returncode
            if self._lastProcess is not None:
                print(self._lastProcess.stdout)
            raise AssertionError("Expected exit code %s but got %s." % (str(expected), str(returncode)))


    def status_should_be(self, expected_status):
        if expected_status != self._status:
            raise AssertionError("Expected status to be '%s' but was '%s'."
                                 % (expected_status, self._status))


    def _run_command(self, args):
        thisDir=os.getcwd()
        os.chdir(self.runDir)
        print(args)
        try:
            process=subprocess.run(args, universal_newlines=True, stdout=subprocess.PIPE,
                                   stderr=subprocess.STDOUT)
        finally:
            os.chdir(thisDir)
        self._lastProcess=process
        if process.returncode != 0:
            print(process.stdout)
