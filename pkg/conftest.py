import os

import hypothesis
import numpy as np

np.seterr(all="warn")

hypothesis.settings.register_profile("standard", deadline=None, max_examples=50)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.register_profile("debugger", deadline=None, report_multiple_bugs=False)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "standard"))
