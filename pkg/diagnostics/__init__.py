"""Runtime identity checks, inequality monitors and empirical rate fits."""
