"""

This module contains evaluation metrics: per-class (class-size normalized) accuracy, flat hit@K, and
hierarchical precision@K (which credits predictions that are close to the truth in a class hierarchy),
plus the report table written by the pipelines.

"""

import os
import threading
import numpy as np
import astropy.table as atpy
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path
from .errors import *

#------------------------------------------------------------------------------------------------------------
class Hierarchy(object):
    """A class hierarchy, treated as an undirected graph for hop distances.

    Attributes:
        nodes (:obj:`list`): Node (class) identifiers.
        edges (:obj:`list`): (parent, child) tuples.
        validLabels (:obj:`set`): Nodes that may appear as predictions (default: all nodes).

    Note:
        hCorrectSet results are cached per (class, K); the cache is guarded by a lock, so a Hierarchy can
        be shared between threads.

    """

    def __init__(self, nodes, edges, validLabels = None):
        self.nodes=list(dict.fromkeys(nodes))
        self._index={n: i for i, n in enumerate(self.nodes)}
        self.edges=[]
        for parent, child in edges:
            for n in [parent, child]:
                if n not in self._index.keys():
                    raise HierarchyError("edge references unknown node '%s'" % (str(n)))
            self.edges.append((parent, child))
        if validLabels is None:
            validLabels=self.nodes
        validLabels=set(validLabels)
        unknown=validLabels.difference(self._index.keys())
        if len(unknown) > 0:
            raise HierarchyError("valid labels not in hierarchy: %s" % (", ".join(sorted(str(u) for u in unknown))))
        self.validLabels=validLabels
        self._validMask=np.array([n in validLabels for n in self.nodes])
        numNodes=len(self.nodes)
        rows=[self._index[p] for p, c in self.edges]
        cols=[self._index[c] for p, c in self.edges]
        self._graph=coo_matrix((np.ones(len(rows)), (rows, cols)), shape = (numNodes, numNodes)).tocsr()
        self._cache={}
        self._hops={}
        self._lock=threading.Lock()


    @property
    def numNodes(self):
        return len(self.nodes)


    def hopDistances(self, node):
        """Returns the array of hop distances from `node` to every node (inf if unreachable).

        """
        if node not in self._index.keys():
            raise HierarchyError("'%s' is not a node of the hierarchy" % (str(node)))
        i=self._index[node]
        with self._lock:
            if i in self._hops.keys():
                return self._hops[i]
        dist=shortest_path(self._graph, directed = False, unweighted = True, indices = i)
        with self._lock:
            self._hops[i]=dist
        return dist


    def correctSet(self, node, K):
        """See :func:`hCorrectSet`.

        """
        if int(K) != K or K < 1:
            raise KTooLargeError("K must be a positive integer (got %s)" % (str(K)))
        key=(node, int(K))
        with self._lock:
            if key in self._cache.keys():
                return self._cache[key]
        dist=self.hopDistances(node)
        reachable=np.isfinite(dist)
        correct=set()
        maxRadius=int(dist[reachable].max())
        for radius in range(0, maxRadius+1):
            ring=np.where((dist == radius) & self._validMask)[0]
            correct.update(self.nodes[j] for j in ring)
            if len(correct) >= K:
                break
        if len(correct) < K:
            raise UnreachableError("only %d valid labels are reachable from '%s' (K = %d)" % (len(correct), str(node), K))
        result=frozenset(correct)
        with self._lock:
            self._cache[key]=result
        return result

#------------------------------------------------------------------------------------------------------------
def loadHierarchy(edgesFileName, validLabelsFileName = None):
    """Reads a hierarchy from a text file with one ``parent<TAB>child`` edge per line (blank lines and
    lines starting with # are skipped), plus an optional file of valid labels (one id per line).

    Returns:
        A :obj:`Hierarchy`.

    """
    if os.path.exists(edgesFileName) == False:
        raise DataIOError("hierarchy file '%s' not found" % (edgesFileName), path = edgesFileName)
    nodes=[]
    edges=[]
    with open(edgesFileName, "r") as inFile:
        for lineNum, line in enumerate(inFile, start = 1):
            line=line.rstrip("\n").rstrip("\r")
            if line.strip() == "" or line.lstrip().startswith("#"):
                continue
            bits=line.split("\t")
            if len(bits) != 2:
                raise ParseError("expected 'parent<TAB>child' in %s" % (edgesFileName), line = lineNum,
                                 column = len(bits[0])+1 if len(bits) == 1 else len(bits[0])+len(bits[1])+2)
            parent, child=bits[0].strip(), bits[1].strip()
            if parent == "" or child == "":
                raise ParseError("empty node name in %s" % (edgesFileName), line = lineNum, column = 1 if parent == "" else len(bits[0])+2)
            nodes.append(parent)
            nodes.append(child)
            edges.append((parent, child))
    validLabels=None
    if validLabelsFileName is not None:
        if os.path.exists(validLabelsFileName) == False:
            raise DataIOError("valid labels file '%s' not found" % (validLabelsFileName), path = validLabelsFileName)
        with open(validLabelsFileName, "r") as inFile:
            validLabels=[line.strip() for line in inFile if line.strip() != ""]
        # Valid labels outside every edge are isolated nodes
        nodes.extend(validLabels)

    return Hierarchy(nodes, edges, validLabels = validLabels)

#------------------------------------------------------------------------------------------------------------
def hCorrectSet(h, c, K):
    """Returns the smallest hop-radius neighbourhood of c in the hierarchy (restricted to valid labels)
    that contains at least K classes. Radii are expanded 0, 1, 2, ..., adding all valid nodes at exactly
    that many hops each time, so the result can hold more than K classes.

    Args:
        h (:obj:`Hierarchy`): Hierarchy.
        c: Class (node) identifier.
        K (:obj:`int`): Minimum set size (>= 1).

    Returns:
        A frozenset of node identifiers.

    Raises:
        UnreachableError: If fewer than K valid nodes are reachable from c.

    """
    return h.correctSet(c, K)

#------------------------------------------------------------------------------------------------------------
def perClassAccuracy(predictions, truths, classSet = None):
    """Mean over classes of the fraction of each class's samples predicted correctly. Classes without
    samples are left out.

    Args:
        predictions: Predicted labels (any comparable type).
        truths: True labels, aligned with `predictions`.
        classSet (optional): Classes to average over (default: the distinct values of `truths`).

    Returns:
        Accuracy in [0, 1].

    """
    predictions=np.asarray(predictions)
    truths=np.asarray(truths)
    if predictions.shape != truths.shape:
        raise ShapeMismatchError("got %d predictions for %d truths" % (predictions.size, truths.size))
    if classSet is None:
        classSet=np.unique(truths)
    classList=list(classSet)
    known=set(classList)
    for t in truths:
        if t not in known:
            raise InvalidLabelError("true label '%s' is not in the class set" % (str(t)))
    accuracies=[]
    for c in classList:
        mask=truths == c
        numSamples=int(mask.sum())
        if numSamples > 0:
            accuracies.append(float(np.sum(predictions[mask] == c))/numSamples)
    if len(accuracies) == 0:
        raise EmptyEvaluationError("no class has any samples")
    return float(np.mean(accuracies))

#------------------------------------------------------------------------------------------------------------
def _checkRankings(rankings, K):
    if int(K) != K or K < 1:
        raise KTooLargeError("K must be a positive integer (got %s)" % (str(K)))
    for r in rankings:
        if len(r) < K:
            raise KTooLargeError("K = %d but a ranking has only %d entries" % (K, len(r)))

#------------------------------------------------------------------------------------------------------------
def flatHitAtK(rankings, truths, K):
    """Fraction of samples whose true label is among the first K entries of their ranking.

    Args:
        rankings: Sequence of ranked label lists (or an N x k array).
        truths: True labels.
        K (:obj:`int`): Cut-off.

    Returns:
        Hit rate in [0, 1].

    """
    if len(rankings) != len(truths):
        raise ShapeMismatchError("got %d rankings for %d truths" % (len(rankings), len(truths)))
    if len(truths) == 0:
        raise EmptyEvaluationError("no samples to evaluate")
    _checkRankings(rankings, K)
    hits=[truths[n] in list(rankings[n][:K]) for n in range(len(truths))]
    return float(np.sum(hits))/len(hits)

#------------------------------------------------------------------------------------------------------------
def hierarchicalPrecisionAtK(rankings, truths, h, K):
    """Mean over samples of |top-K predictions & hCorrectSet(truth, K)| / K.

    """
    if len(rankings) != len(truths):
        raise ShapeMismatchError("got %d rankings for %d truths" % (len(rankings), len(truths)))
    if len(truths) == 0:
        raise EmptyEvaluationError("no samples to evaluate")
    _checkRankings(rankings, K)
    precisions=[]
    for n in range(len(truths)):
        correct=hCorrectSet(h, truths[n], K)
        precisions.append(len(correct.intersection(list(rankings[n][:K])))/K)
    return float(np.mean(precisions))

#------------------------------------------------------------------------------------------------------------
class EvalReport(object):
    """Evaluation results.

    Attributes:
        perClassAccuracy (:obj:`float`): Class-size normalized accuracy.
        flatHits (:obj:`dict`): K -> flat hit@K.
        hierarchicalPrecision (:obj:`dict`): K -> hierarchical precision@K (empty if no hierarchy).
        counts (:obj:`dict`): Class -> number of test samples.

    """

    def __init__(self, perClassAccuracy, flatHits = None, hierarchicalPrecision = None, counts = None):
        self.perClassAccuracy=float(perClassAccuracy)
        self.flatHits=dict(flatHits) if flatHits is not None else {}
        self.hierarchicalPrecision=dict(hierarchicalPrecision) if hierarchicalPrecision is not None else {}
        self.counts=dict(counts) if counts is not None else {}
        for value in [self.perClassAccuracy]+list(self.flatHits.values())+list(self.hierarchicalPrecision.values()):
            if value < 0 or value > 1:
                raise NumericError("evaluation rates must be in [0, 1] (got %s)" % (str(value)))


    def toTable(self):
        """Returns an astropy Table with columns metric, K, value.

        """
        from . import __version__
        metrics, ks, values=['perClassAccuracy'], [0], [self.perClassAccuracy]
        for K in sorted(self.flatHits.keys()):
            metrics.append('flatHit')
            ks.append(K)
            values.append(self.flatHits[K])
        for K in sorted(self.hierarchicalPrecision.keys()):
            metrics.append('hierarchicalPrecision')
            ks.append(K)
            values.append(self.hierarchicalPrecision[K])
        tab=atpy.Table()
        tab['metric']=metrics
        tab['K']=ks
        tab['value']=values
        tab.meta['SYNCVER']=__version__
        return tab


    def write(self, fileName):
        self.toTable().write(fileName, overwrite = True)


    def __eq__(self, other):
        return (isinstance(other, EvalReport) and self.perClassAccuracy == other.perClassAccuracy
                and self.flatHits == other.flatHits and self.hierarchicalPrecision == other.hierarchicalPrecision
                and self.counts == other.counts)

#------------------------------------------------------------------------------------------------------------
def evaluateRankings(rankings, truths, classSet, ks, hierarchy = None, verbose = False):
    """Computes per-class accuracy (from the top-ranked labels), flat hit@K and, if a hierarchy is given,
    hierarchical precision@K, for each K in `ks`. Values of K larger than the ranking length are skipped.

    Returns:
        An :obj:`EvalReport`.

    """
    if len(rankings) == 0:
        raise EmptyEvaluationError("no samples to evaluate")
    maxK=min(len(r) for r in rankings)
    top1=[r[0] for r in rankings]
    report={'perClassAccuracy': perClassAccuracy(top1, truths, classSet), 'flatHits': {},
            'hierarchicalPrecision': {}}
    for K in ks:
        if K > maxK:
            if verbose == True:
                print("... WARNING: skipping K = %d (only %d classes ranked)" % (K, maxK))
            continue
        report['flatHits'][K]=flatHitAtK(rankings, truths, K)
        if hierarchy is not None:
            report['hierarchicalPrecision'][K]=hierarchicalPrecisionAtK(rankings, truths, hierarchy, K)
    counts={}
    for t in truths:
        counts[t]=counts.get(t, 0)+1

    return EvalReport(report['perClassAccuracy'], flatHits = report['flatHits'],
                      hierarchicalPrecision = report['hierarchicalPrecision'], counts = counts)

#------------------------------------------------------------------------------------------------------------
def componentsForVariance(vectors, fraction = 0.95):
    """Number of principal components needed to explain the given fraction of the variance of a set of
    (classifier) vectors.

    Args:
        vectors (:obj:`np.ndarray`): (num vectors x D) array.
        fraction (:obj:`float`, optional): Fraction of variance, in (0, 1].

    Returns:
        The number of components, and the array of explained variance fractions per component.

    """
    vectors=np.asarray(vectors, dtype = float)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ShapeMismatchError("need a 2d array with at least two vectors")
    if fraction <= 0 or fraction > 1:
        raise InvalidSpecError("fraction must be in (0, 1]")
    centred=vectors-vectors.mean(axis = 0)
    singularValues=np.linalg.svd(centred, compute_uv = False)
    variances=singularValues**2
    if variances.sum() == 0:
        raise ZeroVectorError("vectors have zero variance")
    explained=variances/variances.sum()
    numComponents=int(np.searchsorted(np.cumsum(explained), fraction-1e-12)+1)
    return min(numComponents, explained.shape[0]), explained
