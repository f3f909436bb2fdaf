# LaLonde bootstrap experiment
