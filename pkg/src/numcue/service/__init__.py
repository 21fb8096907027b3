from .app import create_app
from .store import Session, SessionError, SessionStore, TrialResponse

__all__ = ["Session", "SessionError", "SessionStore", "TrialResponse", "create_app"]
