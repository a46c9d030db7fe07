from motion_emd.flow_core.fields import (GrayFrame, FlowField, magnitude, direction,
                                         to_luminance)
from motion_emd.flow_core.farneback import FarnebackParams, estimate_flow

__all__ = ['GrayFrame', 'FlowField', 'FarnebackParams', 'estimate_flow',
           'magnitude', 'direction', 'to_luminance']
