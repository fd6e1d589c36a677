from . import squeezenet
from . import mobilenet
from . import shufflenet
