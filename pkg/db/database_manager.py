from sqlalchemy import Engine
from sqlalchemy.orm import sessionmaker
import logging


class DatabaseManager:
    def __init__(self, engine: Engine, logger: logging.Logger):
        self.engine = engine
        self.session = None
        self.logger = logger
        self._sessionmaker = sessionmaker(
            bind=self.engine, autoflush=True, expire_on_commit=False
        )

    def __enter__(self):
        """Returns a database session"""
        try:
            self.logger.debug("Opening checkpoint session...")
            self.session = self._sessionmaker()
            return self.session
        except Exception as e:
            self.logger.error("Checkpoint database connection error", exc_info=e)
            raise

    def __exit__(self, exc_type, exc_val, exc_tb):
        """
        Commits or rolls back the session
        """
        if self.session is None:
            self.logger.error("Checkpoint session was not initialized correctly.")
            return False
        self.logger.debug("Closing checkpoint session...")
        try:
            if exc_type:
                self.logger.error(
                    f"Exception occurred: {exc_val}. Rolling back session...",
                    exc_info=exc_val,
                )
                self.session.rollback()
            else:
                self.session.commit()
        finally:
            self.session.close()
            self.session = None
        return False
