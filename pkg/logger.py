"""Sistema de logging unificado usando loguru (Singleton Pattern).

Este módulo implementa un sistema de logging centralizado para el kit de
spotting de texto estructurado, utilizando el patrón Singleton para
garantizar una única instancia del logger en toda la aplicación.

La salida de consola va siempre a stderr: stdout queda reservado para los
artefactos JSON que emite la CLI.
"""

from loguru import logger
import sys
from pathlib import Path
from typing import Optional, Union


CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
    "<level>{message}</level>"
)
FILE_FORMAT = (
    "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"
)


class Logger:
    """Sistema de logging unificado usando loguru (Singleton Pattern).

    Esta clase implementa el patrón Singleton para proporcionar un sistema
    de logging centralizado para todos los módulos del kit.
    """

    _instance: Optional["Logger"] = None
    _configured: bool = False

    def __new__(cls) -> "Logger":
        """Implementa el patrón Singleton para el logger."""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def setup_logger(
        self,
        level: str = "WARNING",
        log_dir: Optional[Union[str, Path]] = None,
        force: bool = False,
    ) -> None:
        """Configura el sistema de logging con loguru.

        Args:
            level: Nivel mínimo para la consola (stderr)
            log_dir: Directorio para archivos de log. Si es None, solo consola.
            force: Reconfigura aunque el logger ya esté configurado
        """
        if self._configured and not force:
            return

        # Remover handlers previos
        logger.remove()

        logger.add(sys.stderr, level=level.upper(), format=CONSOLE_FORMAT)

        if log_dir is not None:
            Path(log_dir).mkdir(parents=True, exist_ok=True)

            # Handler para archivo principal con rotación
            logger.add(
                f"{log_dir}/spotting.log",
                level="INFO",
                format=FILE_FORMAT,
                rotation="10 MB",
                retention="30 days",
                compression="zip",
            )

            # Handler para errores
            logger.add(
                f"{log_dir}/errors.log",
                level="ERROR",
                format=FILE_FORMAT,
                rotation="1 day",
                retention="90 days",
            )

        self._configured = True
        logger.debug(f"Sistema de logging configurado (nivel {level.upper()})")

    def get_logger(self):
        """Obtiene la instancia del logger configurado.

        Returns:
            Logger configurado de loguru
        """
        if not self._configured:
            self.setup_logger()
        return logger


# Instancia global del logger
app_logger = Logger()
