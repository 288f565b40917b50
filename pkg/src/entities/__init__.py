# Entities subpackage
from .record import Axis, FeatureVector, MomentTensorRecord, PrincipalAxes
from .cell import PresenceSeries, SpatialCell
from .table import AssociationResult, ContingencyTable2x2, LaggedPair
