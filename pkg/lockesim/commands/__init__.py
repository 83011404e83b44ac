from .run import run_command
from .fuzz import fuzz_command
from .explore import explore_command
from .tables import tables_command
from .msc import msc_command
