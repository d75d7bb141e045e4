"""

This module contains basic set-up stuff (parsing config files, making output directories, seeding random
number streams) used by the ``phantomsync`` command and the pipelines.

"""

import os
import copy
import time
import zlib
import yaml
import numpy as np
from .errors import ConfigError

# Values used for any key not given in the config file
DEFAULTS={'seenFeatures': None, 'seenLabels': None, 'unseenFeatures': None, 'unseenLabels': None,
          'seenEmbeddings': None, 'unseenEmbeddings': None, 'sourceWeights': None, 'splitFile': None,
          'hierarchyFile': None, 'validLabelsFile': None, 'normalizeEmbeddings': True,
          'loss': 'ovo', 'lambda': 1.0, 'sigma': 1.0, 'eta': 0.0, 'gamma': 0.0, 'h': 1.0,
          'numPhantoms': None, 'phantomRatio': None, 'phantomInit': 'auto', 'phantomOuterRounds': 1,
          'metric': 'scaledIdentity', 'crossValidate': False, 'evalK': [1, 2, 5, 10, 20],
          'sweepRatios': [0.2, 0.4, 0.6, 0.8, 1.0], 'synthetic': None, 'seed': 0, 'makePlots': True}

NESTED_DEFAULTS={'trainOptions': {'maxIters': 1000, 'gradTol': 1e-6, 'initialStep': 1.0, 'shrink': 0.5,
                                  'armijo': 1e-4, 'minStep': 1e-20},
                 'metricOptions': {'gammaM': 1.0, 'folds': 5, 'outerRounds': 2},
                 'cvOptions': {'folds': 5, 'mode': 'classWise', 'stage2': False,
                               'lambdaValues': None, 'sigmaValues': None, 'etaValues': None,
                               'gammaValues': None, 'conseTValues': [1, 2, 5, 10]},
                 'conseOptions': {'T': 10, 'l2Reg': 1e-2, 'crossValidateT': False}}

SYNTHETIC_DEFAULTS={'S': 40, 'U': 10, 'D': 20, 'd': 10, 'samplesPerClass': 100, 'noiseStd': 0.05,
                    'margin': 1.0, 'makeHierarchy': True}

NUMERIC_KEYS=['lambda', 'sigma', 'eta', 'gamma', 'h', 'phantomRatio', 'sourceWeights', 'sweepRatios']

ALLOWED_VALUES={'loss': ['ovo', 'cs', 'struct'],
                'metric': ['scaledIdentity', 'diagonal'],
                'phantomInit': ['identity', 'randomSubset', 'kmeans', 'mixed', 'auto']}

#------------------------------------------------------------------------------------------------------------
def parseConfigFile(parDictFileName, verbose = False):
    """Parse a phantomsync .yml config file.

    A manifest written by an earlier run (``manifest.yml``) is also accepted: its ``config`` section is
    used, so that the run can be repeated exactly.

    Args:
        parDictFileName (:obj:`str`): Path to a .yml configuration file.
        verbose (:obj:`bool`, optional): If True, warning messages may be printed to the console, if there
            are any.

    Returns:
        A dictionary of parameters.

    Raises:
        ConfigError: If the file cannot be read or contains invalid values.

    """

    if verbose:
        print(">>> Parsing config file %s" % (parDictFileName))
    if os.path.exists(parDictFileName) == False:
        raise ConfigError("config file '%s' not found" % (parDictFileName))
    with open(parDictFileName, "r") as stream:
        try:
            parDict=yaml.safe_load(stream)
        except yaml.YAMLError as e:
            raise ConfigError("couldn't parse config file '%s': %s" % (parDictFileName, e))
    if parDict is None:
        parDict={}
    if type(parDict) != dict:
        raise ConfigError("config file '%s' must contain key: value pairs" % (parDictFileName))
    if 'manifestVersion' in parDict.keys() and 'config' in parDict.keys():
        if verbose:
            print("... reading config section of run manifest")
        parDict=parDict['config']

    # Relative paths are relative to the config file location
    configDir=os.path.dirname(os.path.abspath(parDictFileName))
    for key in ['seenFeatures', 'seenLabels', 'unseenFeatures', 'unseenLabels', 'splitFile',
                'hierarchyFile', 'validLabelsFile', 'seenEmbeddings', 'unseenEmbeddings']:
        if key in parDict.keys() and parDict[key] is not None:
            parDict[key]=_resolvePaths(parDict[key], configDir)

    # To aid user friendliness - spot any out-of-date / renamed parameters here
    # Use None for those that are totally removed
    oldKeyMap={'lam': 'lambda', 'R': 'numPhantoms', 'initStrategy': 'phantomInit', 'threads': None}
    for k in oldKeyMap.keys():
        if k in list(parDict.keys()) and oldKeyMap[k] is None:
            del parDict[k]
            if verbose:
                print("... WARNING: config parameter '%s' is no longer used and will be ignored." % (k))
        if k in list(parDict.keys()) and type(oldKeyMap[k]) == str:
            if verbose:
                print("... WARNING: config parameter '%s' has been renamed to '%s' - you may wish to update your config file." % (k, oldKeyMap[k]))
            parDict[oldKeyMap[k]]=parDict[k]
            del parDict[k]

    parDict=fillDefaults(parDict)
    coerceNumbers(parDict)
    checkConfig(parDict)

    if verbose:
        print("... config loaded successfully")

    return parDict

#------------------------------------------------------------------------------------------------------------
def _resolvePaths(value, configDir):
    if type(value) == list:
        return [_resolvePaths(v, configDir) for v in value]
    if os.path.isabs(value):
        return value
    return os.path.normpath(configDir+os.path.sep+value)

#------------------------------------------------------------------------------------------------------------
def fillDefaults(parDict):
    """Fills in default values for any keys missing from the parameters dictionary. The dictionary is
    modified in place (and returned).

    """
    for key in DEFAULTS.keys():
        if key not in parDict.keys():
            parDict[key]=copy.deepcopy(DEFAULTS[key])
    for key in NESTED_DEFAULTS.keys():
        if key not in parDict.keys() or parDict[key] is None:
            parDict[key]={}
        for subKey in NESTED_DEFAULTS[key].keys():
            if subKey not in parDict[key].keys():
                parDict[key][subKey]=copy.deepcopy(NESTED_DEFAULTS[key][subKey])
    if parDict['synthetic'] is not None:
        for key in SYNTHETIC_DEFAULTS.keys():
            if key not in parDict['synthetic'].keys():
                parDict['synthetic'][key]=SYNTHETIC_DEFAULTS[key]

    return parDict

#------------------------------------------------------------------------------------------------------------
def _toNumber(value):
    # PyYAML reads e.g. 1e-2 (no decimal point) as a string
    if type(value) == str:
        try:
            return float(value)
        except ValueError:
            return value
    if type(value) == list:
        return [_toNumber(v) for v in value]
    return value

#------------------------------------------------------------------------------------------------------------
def coerceNumbers(parDict):
    """Converts numeric values that YAML has read as strings (e.g., ``1e-3``) into floats. The dictionary
    is modified in place.

    """
    for key in NUMERIC_KEYS:
        if key in parDict.keys():
            parDict[key]=_toNumber(parDict[key])
    for section in ['trainOptions', 'metricOptions', 'cvOptions', 'conseOptions', 'synthetic']:
        if section in parDict.keys() and type(parDict[section]) == dict:
            for key in parDict[section].keys():
                parDict[section][key]=_toNumber(parDict[section][key])

#------------------------------------------------------------------------------------------------------------
def checkConfig(parDict):
    """Checks values in the parameters dictionary, raising :class:`ConfigError` if any are invalid.

    """
    for key in ALLOWED_VALUES.keys():
        if parDict[key] not in ALLOWED_VALUES[key]:
            raise ConfigError("valid values for '%s' are %s - edit '%s' in config." % (key, ALLOWED_VALUES[key], key))
    if parDict['cvOptions']['mode'] not in ['classWise', 'sampleWise']:
        raise ConfigError("valid values for cvOptions['mode'] are 'classWise' or 'sampleWise' - edit config.")
    for key in ['lambda', 'eta', 'gamma']:
        if _isNumber(parDict[key]) == False or parDict[key] < 0:
            raise ConfigError("'%s' must be a non-negative number" % (key))
    for key in ['sigma', 'h']:
        if _isNumber(parDict[key]) == False or parDict[key] <= 0:
            raise ConfigError("'%s' must be a positive number" % (key))
    if type(parDict['seed']) != int or parDict['seed'] < 0:
        raise ConfigError("'seed' must be a non-negative integer")
    if parDict['numPhantoms'] is not None and (type(parDict['numPhantoms']) != int or parDict['numPhantoms'] < 1):
        raise ConfigError("'numPhantoms' must be an integer >= 1")
    if type(parDict['phantomOuterRounds']) != int or parDict['phantomOuterRounds'] < 1:
        raise ConfigError("'phantomOuterRounds' must be an integer >= 1")
    if parDict['metricOptions']['folds'] < 2:
        raise ConfigError("metricOptions['folds'] must be >= 2")
    if parDict['cvOptions']['folds'] < 2:
        raise ConfigError("cvOptions['folds'] must be >= 2")
    for k in parDict['evalK']:
        if type(k) != int or k < 1:
            raise ConfigError("evalK values must be integers >= 1")
    for r in parDict['sweepRatios']:
        if _isNumber(r) == False or r <= 0 or r > 2:
            raise ConfigError("sweepRatios must be in the range (0, 2]")

#------------------------------------------------------------------------------------------------------------
def _isNumber(value):
    return type(value) in [int, float] and np.isfinite(value)

#------------------------------------------------------------------------------------------------------------
def parseParamOverrides(paramList):
    """Converts a list of KEY=VALUE strings (as given with the ``-p`` command-line switch) into a dictionary.
    Values are interpreted as YAML, so numbers and lists work as expected. Nested keys can be given using
    a dot, e.g., ``trainOptions.maxIters=200``.

    """
    overrides={}
    if paramList is None:
        return overrides
    for item in paramList:
        if item.find("=") == -1:
            raise ConfigError("parameter overrides must be given as KEY=VALUE (got '%s')" % (item))
        key, value=item.split("=", 1)
        try:
            overrides[key.strip()]=yaml.safe_load(value)
        except yaml.YAMLError:
            raise ConfigError("couldn't interpret value given for parameter '%s'" % (key))

    return overrides

#------------------------------------------------------------------------------------------------------------
def makeRNG(seed, streamName):
    """Returns a numpy random Generator for the named sub-stream of the given seed. Each stage of a run
    (e.g., 'data', 'init', 'folds', 'conse') draws from its own stream, so that it can be reproduced
    independently of the others.

    Args:
        seed (:obj:`int`): The run seed (>= 0).
        streamName (:obj:`str`): Name of the sub-stream.

    Returns:
        A :obj:`numpy.random.Generator`.

    """
    if seed < 0:
        raise ConfigError("seed must be >= 0")
    return np.random.default_rng([int(seed), zlib.crc32(streamName.encode('utf-8'))])

#------------------------------------------------------------------------------------------------------------
def getNumThreads():
    """Returns the maximum number of worker threads to use, as set by the ``PHANTOM_SYNC_THREADS``
    environment variable (default: number of CPUs).

    """
    if 'PHANTOM_SYNC_THREADS' in os.environ.keys():
        try:
            numThreads=int(os.environ['PHANTOM_SYNC_THREADS'])
        except ValueError:
            raise ConfigError("PHANTOM_SYNC_THREADS must be an integer")
        if numThreads < 1:
            raise ConfigError("PHANTOM_SYNC_THREADS must be >= 1")
        return numThreads
    numThreads=os.cpu_count()
    if numThreads is None:
        numThreads=1
    return numThreads

#------------------------------------------------------------------------------------------------------------
class SynCConfig(object):
    """An object that manages phantomsync's configuration (paths to data files, output directories,
    hyperparameters etc.).

    Attributes:
        parDict (:obj:`dict`): Dictionary containing the contents of the config file (with defaults filled).
        configFileName (:obj:`str`): Path to the config file (empty if a dictionary was given).
        rootOutDir (:obj:`str`): Path to the directory where all output will be written.
        matricesDir (:obj:`str`): Path to the directory where learned matrices are written.
        diagnosticsDir (:obj:`str`): Path to the directory where plots and other diagnostics are written.
        numThreads (:obj:`int`): Maximum number of worker threads.
        outputFiles (:obj:`list`): Paths of all files written so far during this run.

    """

    def __init__(self, config, makeOutputDirs = True, outputDir = None, seed = None, overrides = None,
                 verbose = True):
        """Creates an object that manages phantomsync's configuration.

        Args:
            config (:obj:`str` or :obj:`dict`): Either the path to a .yml configuration file, or a
                dictionary containing configuration parameters.
            makeOutputDirs (:obj:`bool`, optional): If True, create the output directories.
            outputDir (:obj:`str`, optional): If given, overrides the output directory.
            seed (:obj:`int`, optional): If given, overrides the seed set in the config.
            overrides (:obj:`dict`, optional): Parameters that override those in the config file.
                Nested parameters can be given with dotted keys (e.g., ``trainOptions.maxIters``).
            verbose (:obj:`bool`): If True, print some info to the terminal while we set-up.

        """
        self.verbose=verbose
        self._timeStarted=time.time()

        if type(config) == str:
            self.parDict=parseConfigFile(config, verbose = self.verbose)
            self.configFileName=config
        elif type(config) == dict:
            self.parDict=fillDefaults(copy.deepcopy(config))
            self.configFileName=''
        else:
            raise ConfigError("'config' must be either a path to a .yml file, or a dictionary of parameters.")

        if overrides is not None:
            for key in overrides.keys():
                if key.find(".") != -1:
                    outer, inner=key.split(".", 1)
                    if outer not in self.parDict.keys() or type(self.parDict[outer]) != dict:
                        raise ConfigError("can't override '%s' - '%s' is not a section of the config" % (key, outer))
                    self.parDict[outer][inner]=overrides[key]
                else:
                    self.parDict[key]=overrides[key]
        if seed is not None:
            self.parDict['seed']=int(seed)
        if outputDir is not None:
            self.parDict['outputDir']=outputDir
        coerceNumbers(self.parDict)
        checkConfig(self.parDict)

        # Kept so that we can restore it if parameters are changed (e.g., by cross validation) and echo
        # exactly what was asked for into the run manifest
        self._origParDict=copy.deepcopy(self.parDict)

        self.seed=self.parDict['seed']
        self.numThreads=getNumThreads()
        self.outputFiles=[]

        # Output dirs
        if 'outputDir' in self.parDict.keys() and self.parDict['outputDir'] is not None:
            self.rootOutDir=os.path.abspath(self.parDict['outputDir'])
        else:
            if self.configFileName.find(".yml") == -1:
                if makeOutputDirs == True:
                    raise ConfigError("either give outputDir or use a config file with .yml extension")
                self.rootOutDir=os.getcwd()
            else:
                self.rootOutDir=os.getcwd()+os.path.sep+os.path.split(self.configFileName.replace(".yml", ""))[-1]
        self.matricesDir=self.rootOutDir+os.path.sep+"matrices"
        self.diagnosticsDir=self.rootOutDir+os.path.sep+"diagnostics"
        if makeOutputDirs == True:
            for d in [self.rootOutDir, self.matricesDir, self.diagnosticsDir]:
                os.makedirs(d, exist_ok = True)


    def makeRNG(self, streamName):
        """Returns the random Generator for the named sub-stream of this run's seed.

        """
        return makeRNG(self.seed, streamName)


    def restoreConfig(self):
        """Restores the parameters dictionary to its state at start-up.

        """
        self.parDict=copy.deepcopy(self._origParDict)


    def recordOutput(self, path):
        """Adds a path to the list of files written during this run (these get hashed into the manifest).

        """
        path=os.path.abspath(path)
        if path not in self.outputFiles:
            self.outputFiles.append(path)


    def timeSinceStart(self):
        return time.time()-self._timeStarted
