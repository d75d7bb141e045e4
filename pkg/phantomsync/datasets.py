"""

This module contains routines for reading and writing the text file formats used by phantomsync
(matrices, labels, class splits, embeddings), and for generating synthetic zero-shot datasets.

Matrix files have a header line giving ``rows cols``, followed by one whitespace-separated row of decimal
numbers per line. Embedding files are the same, except that each row starts with its class id.

"""

import os
import yaml
import numpy as np
from scipy.cluster.hierarchy import linkage
from .errors import *
from .startUp import makeRNG, SYNTHETIC_DEFAULTS
from .semantics import EmbeddingTable
from .training import LabeledDataset
from .evaluation import Hierarchy

# Refuse to read or write matrices bigger than this
MAX_MATRIX_ENTRIES=100000000

#------------------------------------------------------------------------------------------------------------
def _readLines(fileName):
    if os.path.exists(fileName) == False:
        raise DataIOError("file '%s' not found" % (fileName), path = fileName)
    try:
        with open(fileName, "r") as inFile:
            lines=inFile.readlines()
    except (OSError, UnicodeDecodeError) as e:
        raise DataIOError("couldn't read '%s': %s" % (fileName, e), path = fileName)
    return lines

#------------------------------------------------------------------------------------------------------------
def _tokenize(line):
    """Returns a list of (token, 1-based column) for a whitespace-separated line.

    """
    tokens=[]
    col=0
    for bit in line.split():
        col=line.index(bit, col)
        tokens.append((bit, col+1))
        col=col+len(bit)
    return tokens

#------------------------------------------------------------------------------------------------------------
def _parseHeader(lines, fileName):
    if len(lines) == 0:
        raise ParseError("'%s' is empty" % (fileName), line = 1, column = 1)
    tokens=_tokenize(lines[0])
    if len(tokens) != 2:
        raise ParseError("header of '%s' must be 'rows cols'" % (fileName), line = 1,
                         column = tokens[2][1] if len(tokens) > 2 else 1)
    shape=[]
    for token, col in tokens:
        try:
            value=int(token)
        except ValueError:
            raise ParseError("bad header value '%s' in '%s'" % (token, fileName), line = 1, column = col)
        if value < 0:
            raise ParseError("negative header value in '%s'" % (fileName), line = 1, column = col)
        shape.append(value)
    if shape[0]*shape[1] > MAX_MATRIX_ENTRIES:
        raise DataIOError("'%s' holds %d entries - refusing matrices with more than %d" % (fileName, shape[0]*shape[1], MAX_MATRIX_ENTRIES),
                          path = fileName)
    return shape[0], shape[1]

#------------------------------------------------------------------------------------------------------------
def _parseRows(fileName, withIds = False):
    lines=_readLines(fileName)
    numRows, numCols=_parseHeader(lines, fileName)
    ids=[]
    values=np.zeros((numRows, numCols))
    rowCount=0
    for lineIndex in range(1, len(lines)):
        lineNum=lineIndex+1
        tokens=_tokenize(lines[lineIndex])
        if len(tokens) == 0:
            continue
        if rowCount == numRows:
            raise ParseError("'%s' has more rows than its header says (%d)" % (fileName, numRows), line = lineNum,
                             column = tokens[0][1])
        if withIds == True:
            ids.append(tokens[0][0])
            tokens=tokens[1:]
        if len(tokens) != numCols:
            col=tokens[numCols][1] if len(tokens) > numCols else len(lines[lineIndex].rstrip("\r\n"))+1
            raise ParseError("expected %d values but found %d in '%s'" % (numCols, len(tokens), fileName),
                             line = lineNum, column = col)
        for j, (token, col) in enumerate(tokens):
            try:
                value=float(token)
            except ValueError:
                raise ParseError("couldn't read '%s' as a number in '%s'" % (token, fileName), line = lineNum,
                                 column = col)
            if np.isfinite(value) == False:
                raise NonFiniteError("non-finite value '%s' in '%s'" % (token, fileName), line = lineNum)
            values[rowCount, j]=value
        rowCount=rowCount+1
    if rowCount != numRows:
        raise ParseError("'%s' has %d rows but its header says %d" % (fileName, rowCount, numRows),
                         line = len(lines)+1, column = 1)
    return ids, values

#------------------------------------------------------------------------------------------------------------
def loadMatrix(fileName):
    """Reads a matrix in phantomsync's text format.

    Args:
        fileName (:obj:`str`): Path to the file.

    Returns:
        A 2d :obj:`np.ndarray`.

    Raises:
        DataIOError: If the file can't be read (or is too big).
        ParseError: If a row is ragged, a token isn't a number, or the row count doesn't match the header.
        NonFiniteError: If the file contains NaN or Inf.

    """
    ids, values=_parseRows(fileName, withIds = False)
    return values

#------------------------------------------------------------------------------------------------------------
def saveMatrix(fileName, matrix):
    """Writes a matrix in phantomsync's text format, with 17 significant digits (so that reading it back
    gives exactly the same values).

    """
    matrix=np.asarray(matrix, dtype = float)
    if matrix.ndim == 1:
        matrix=matrix.reshape(1, -1)
    if matrix.ndim != 2:
        raise ShapeMismatchError("can only save 1d or 2d arrays")
    if matrix.size > MAX_MATRIX_ENTRIES:
        raise DataIOError("refusing to write a matrix with more than %d entries" % (MAX_MATRIX_ENTRIES), path = fileName)
    if np.all(np.isfinite(matrix)) == False:
        raise NonFiniteError("matrix to be written to '%s' contains NaN or Inf values" % (fileName))
    np.savetxt(fileName, matrix, fmt = '%.17g', header = "%d %d" % matrix.shape, comments = '')

#------------------------------------------------------------------------------------------------------------
def loadEmbeddings(fileName, normalize = False):
    """Reads an embedding file (matrix format, with the class id as the first token of each row).

    Args:
        fileName (:obj:`str`): Path to the file.
        normalize (:obj:`bool`, optional): If True, rows are scaled to unit l2 norm.

    Returns:
        An :obj:`EmbeddingTable`.

    """
    ids, values=_parseRows(fileName, withIds = True)
    table=EmbeddingTable(ids, values)
    if normalize == True:
        from .semantics import normalizeEmbeddings
        table=normalizeEmbeddings(table)
    return table

#------------------------------------------------------------------------------------------------------------
def saveEmbeddings(fileName, table):
    """Writes an :obj:`EmbeddingTable` to an embedding file.

    """
    with open(fileName, "w") as outFile:
        outFile.write("%d %d\n" % (table.numClasses, table.dim))
        for classId, row in zip(table.classIds, table.vectors):
            outFile.write("%s %s\n" % (classId, " ".join("%.17g" % v for v in row)))

#------------------------------------------------------------------------------------------------------------
def loadLabels(fileName):
    """Reads a labels file (one class id per line, aligned with the rows of a feature matrix). Blank
    lines at the end of the file are ignored.

    Returns:
        List of class id strings.

    """
    lines=[line.strip() for line in _readLines(fileName)]
    while len(lines) > 0 and lines[-1] == "":
        lines.pop()
    for i in range(len(lines)):
        if lines[i] == "":
            raise ParseError("blank line in labels file '%s'" % (fileName), line = i+1, column = 1)
        if len(lines[i].split()) != 1:
            raise ParseError("class ids can't contain whitespace ('%s')" % (fileName), line = i+1,
                             column = _tokenize(lines[i])[1][1])
    return lines

#------------------------------------------------------------------------------------------------------------
def saveLabels(fileName, labels):
    with open(fileName, "w") as outFile:
        for label in labels:
            outFile.write("%s\n" % (label))

#------------------------------------------------------------------------------------------------------------
def loadSplit(fileName):
    """Reads a class split file, which has a ``[seen]`` section and an ``[unseen]`` section, each listing
    class ids (one per line). Lines starting with # are comments.

    Returns:
        Lists of seen and unseen class ids.

    """
    sections={'seen': [], 'unseen': []}
    current=None
    for lineIndex, line in enumerate(_readLines(fileName)):
        line=line.strip()
        if line == "" or line.startswith("#"):
            continue
        if line.startswith("["):
            name=line.strip("[]").strip()
            if name not in sections.keys():
                raise ParseError("unknown section '%s' in split file '%s'" % (line, fileName), line = lineIndex+1,
                                 column = 1)
            current=name
            continue
        if current is None:
            raise ParseError("class id outside a [seen] / [unseen] section in '%s'" % (fileName),
                             line = lineIndex+1, column = 1)
        sections[current].append(line)
    for name in sections.keys():
        if len(set(sections[name])) != len(sections[name]):
            raise DuplicateClassError("duplicate class ids in the [%s] section of '%s'" % (name, fileName))
    overlap=set(sections['seen']).intersection(sections['unseen'])
    if len(overlap) > 0:
        raise InvalidLabelError("classes listed as both seen and unseen: %s" % (", ".join(sorted(overlap))))
    if len(sections['seen']) == 0 or len(sections['unseen']) == 0:
        raise ParseError("split file '%s' needs non-empty [seen] and [unseen] sections" % (fileName),
                         line = 1, column = 1)
    return sections['seen'], sections['unseen']

#------------------------------------------------------------------------------------------------------------
def saveSplit(fileName, seenIds, unseenIds):
    with open(fileName, "w") as outFile:
        outFile.write("[seen]\n")
        for c in seenIds:
            outFile.write("%s\n" % (c))
        outFile.write("[unseen]\n")
        for c in unseenIds:
            outFile.write("%s\n" % (c))

#------------------------------------------------------------------------------------------------------------
def loadDataset(featuresFileName, labelsFileName, classIds):
    """Reads a feature matrix and its labels file into a :obj:`LabeledDataset`. Samples whose label is not
    one of `classIds` raise an error.

    Args:
        featuresFileName (:obj:`str`): Matrix file (N x D).
        labelsFileName (:obj:`str`): Labels file (N lines).
        classIds (:obj:`list`): Class order; label indices refer to this list.

    Returns:
        A :obj:`LabeledDataset`.

    """
    features=loadMatrix(featuresFileName)
    labels=loadLabels(labelsFileName)
    if len(labels) != features.shape[0]:
        raise ShapeMismatchError("'%s' has %d rows but '%s' has %d labels"
                                 % (featuresFileName, features.shape[0], labelsFileName, len(labels)))
    indexMap={c: i for i, c in enumerate(classIds)}
    indices=[]
    for label in labels:
        if label not in indexMap.keys():
            raise InvalidLabelError("label '%s' in '%s' is not one of the expected classes" % (label, labelsFileName))
        indices.append(indexMap[label])
    return LabeledDataset(features, np.array(indices, dtype = np.int64), classIds = classIds)

#------------------------------------------------------------------------------------------------------------
class SyntheticSpec(object):
    """Settings for a synthetic zero-shot dataset.

    Args:
        S (:obj:`int`): Number of seen classes.
        U (:obj:`int`): Number of unseen classes.
        D (:obj:`int`): Feature dimension.
        d (:obj:`int`): Semantic embedding dimension (d <= D is recommended).
        samplesPerClass (:obj:`int`): Samples drawn per class (for both seen and unseen classes).
        noiseStd (:obj:`float`): Standard deviation of the Gaussian feature noise (>= 0).
        margin (:obj:`float`, optional): Distance of the class means from the origin.
        seed (:obj:`int`, optional): Seed; the data are drawn from its 'data' sub-stream.
        makeHierarchy (:obj:`bool`, optional): If True, :func:`generateSyntheticHierarchy` is available
            for this spec (used by the pipelines).

    """

    def __init__(self, S, U, D, d, samplesPerClass, noiseStd, margin = 1.0, seed = 0, makeHierarchy = True):
        for name, value in [('S', S), ('U', U), ('D', D), ('d', d), ('samplesPerClass', samplesPerClass)]:
            if int(value) != value or value < 1:
                raise InvalidSpecError("%s must be an integer >= 1 (got %s)" % (name, str(value)))
        if noiseStd < 0 or np.isfinite(noiseStd) == False:
            raise InvalidSpecError("noiseStd must be a finite number >= 0")
        if margin <= 0 or np.isfinite(margin) == False:
            raise InvalidSpecError("margin must be a finite number > 0")
        if int(seed) != seed or seed < 0:
            raise InvalidSpecError("seed must be an integer >= 0")
        self.S=int(S)
        self.U=int(U)
        self.D=int(D)
        self.d=int(d)
        self.samplesPerClass=int(samplesPerClass)
        self.noiseStd=float(noiseStd)
        self.margin=float(margin)
        self.seed=int(seed)
        self.makeHierarchy=bool(makeHierarchy)


    @classmethod
    def fromDict(cls, specDict, seed = 0):
        """Makes a SyntheticSpec from a config file's ``synthetic`` section (missing keys get defaults).

        """
        params=dict(SYNTHETIC_DEFAULTS)
        params.update(specDict)
        unknown=set(params.keys()).difference(SYNTHETIC_DEFAULTS.keys())
        if len(unknown) > 0:
            raise InvalidSpecError("unknown synthetic dataset parameters: %s" % (", ".join(sorted(unknown))))
        return cls(seed = seed, **params)


    def toDict(self):
        return {'S': self.S, 'U': self.U, 'D': self.D, 'd': self.d, 'samplesPerClass': self.samplesPerClass,
                'noiseStd': self.noiseStd, 'margin': self.margin, 'makeHierarchy': self.makeHierarchy}


    @property
    def classIds(self):
        return ["class%03d" % (i) for i in range(self.S+self.U)]

#------------------------------------------------------------------------------------------------------------
def _drawSynthetic(spec):
    rng=makeRNG(spec.seed, 'data')
    numClasses=spec.S+spec.U
    A=rng.standard_normal((numClasses, spec.d))
    A=A/np.linalg.norm(A, axis = 1)[:, np.newaxis]
    T=rng.standard_normal((spec.d, spec.D))
    Wstar=np.dot(A, T)
    means=spec.margin*Wstar/np.linalg.norm(Wstar, axis = 1)[:, np.newaxis]
    n=spec.samplesPerClass
    labels=np.repeat(np.arange(numClasses), n)
    features=means[labels]+spec.noiseStd*rng.standard_normal((labels.shape[0], spec.D))
    return A, Wstar, features, labels

#------------------------------------------------------------------------------------------------------------
def generateSynthetic(spec):
    """Generates a synthetic zero-shot dataset. Class embeddings a_c are drawn uniformly on the unit
    sphere in d dimensions; a fixed d x D map T with unit-variance entries gives the true classifiers
    w*_c = a_c^T T; samples of class c are w*_c / ||w*_c|| * margin plus Gaussian noise. The first S
    classes are seen, the rest unseen. The same spec always gives identical data.

    Args:
        spec (:obj:`SyntheticSpec`): Dataset settings.

    Returns:
        Seen-class training data, unseen-class test data (both :obj:`LabeledDataset`), and the seen and
        unseen class embeddings (both normalized :obj:`EmbeddingTable`).

    """
    A, Wstar, features, labels=_drawSynthetic(spec)
    classIds=spec.classIds
    seenMask=labels < spec.S
    seenData=LabeledDataset(features[seenMask], labels[seenMask], classIds = classIds[:spec.S])
    unseenData=LabeledDataset(features[~seenMask], labels[~seenMask]-spec.S, classIds = classIds[spec.S:])
    seen=EmbeddingTable(classIds[:spec.S], A[:spec.S], normalized = True)
    unseen=EmbeddingTable(classIds[spec.S:], A[spec.S:], normalized = True)

    return seenData, unseenData, seen, unseen

#------------------------------------------------------------------------------------------------------------
def syntheticTrueClassifiers(spec):
    """Returns the (S+U) x D array of true classifiers w*_c used to generate the dataset for `spec`.

    """
    return _drawSynthetic(spec)[1]

#------------------------------------------------------------------------------------------------------------
def generateSyntheticHierarchy(spec, method = 'average'):
    """Builds a class hierarchy for a synthetic dataset by agglomerative clustering of all the class
    embeddings. Leaves are the class ids; internal nodes are named ``node000``, ``node001``, ... (the last
    one is the root). The unseen classes are the valid labels.

    Returns:
        A :obj:`Hierarchy`.

    """
    A=_drawSynthetic(spec)[0]
    classIds=spec.classIds
    numClasses=len(classIds)
    if numClasses < 2:
        return Hierarchy(classIds, [], validLabels = classIds[spec.S:])
    Z=linkage(A, method = method, metric = 'euclidean')
    names=list(classIds)+["node%03d" % (i) for i in range(numClasses-1)]
    edges=[]
    for i in range(Z.shape[0]):
        parent=names[numClasses+i]
        edges.append((parent, names[int(Z[i, 0])]))
        edges.append((parent, names[int(Z[i, 1])]))
    return Hierarchy(names, edges, validLabels = classIds[spec.S:])

#------------------------------------------------------------------------------------------------------------
def writeSyntheticDataset(outDir, spec, verbose = False):
    """Writes a synthetic dataset to files (features, labels, embeddings, split, hierarchy), plus a
    ``config.yml`` that runs the zero-shot pipeline on them.

    Returns:
        Dictionary mapping file roles to paths.

    """
    if verbose == True:
        print(">>> Writing synthetic dataset (S = %d, U = %d, D = %d, d = %d) to %s" % (spec.S, spec.U, spec.D, spec.d, outDir))
    os.makedirs(outDir, exist_ok = True)
    seenData, unseenData, seen, unseen=generateSynthetic(spec)
    paths={}
    for key in ['seenFeatures', 'seenLabels', 'unseenFeatures', 'unseenLabels', 'seenEmbeddings',
                'unseenEmbeddings', 'splitFile']:
        paths[key]=outDir+os.path.sep+key+".txt"
    saveMatrix(paths['seenFeatures'], seenData.features)
    saveLabels(paths['seenLabels'], [seenData.classIds[i] for i in seenData.labels])
    saveMatrix(paths['unseenFeatures'], unseenData.features)
    saveLabels(paths['unseenLabels'], [unseenData.classIds[i] for i in unseenData.labels])
    saveEmbeddings(paths['seenEmbeddings'], seen)
    saveEmbeddings(paths['unseenEmbeddings'], unseen)
    saveSplit(paths['splitFile'], seen.classIds, unseen.classIds)
    if spec.makeHierarchy == True:
        h=generateSyntheticHierarchy(spec)
        paths['hierarchyFile']=outDir+os.path.sep+"hierarchy.txt"
        paths['validLabelsFile']=outDir+os.path.sep+"validLabels.txt"
        with open(paths['hierarchyFile'], "w") as outFile:
            outFile.write("# parent\tchild\n")
            for parent, child in h.edges:
                outFile.write("%s\t%s\n" % (parent, child))
        saveLabels(paths['validLabelsFile'], unseen.classIds)

    configDict={}
    for key in paths.keys():
        configDict[key]=os.path.basename(paths[key])
    configDict['seed']=spec.seed
    paths['config']=outDir+os.path.sep+"config.yml"
    with open(paths['config'], "w") as outFile:
        outFile.write("# Synthetic dataset: %s\n" % (str(spec.toDict())))
        yaml.safe_dump(configDict, outFile, default_flow_style = False, sort_keys = True)
    if verbose == True:
        print("... wrote %d files" % (len(paths)))

    return paths
