# -*- coding: utf-8 -*-
""" Plotting line charts from sweep summaries and training history """
import pandas as pd
from pandas.core.frame import DataFrame
import plotly.express as px
from plotly.graph_objs._figure import Figure


class Plotter:
    """ Transforming metric summaries into long dataframes and plotting figures """
    def __init__(self, metrics: list = None):
        self.metrics = metrics or ["mse", "cc"]

    def build_df_from_output(self, summary: DataFrame, x_column: str = "degrees") -> DataFrame:
        """ grouped summary (one row per x) -> long dataframe, one row per (x, metric) """
        frames = []
        for metric in self.metrics:
            frames.append(pd.DataFrame({
                x_column: summary[x_column],
                "value": summary[f"{metric}_mean"],
                "std": summary[f"{metric}_std"].fillna(0.0),
                "type_": metric}))
        if not frames:
            return pd.DataFrame(columns=[x_column, "value", "std", "type_"])
        return pd.concat(frames, ignore_index=True)

    @staticmethod
    def build_figure(info: DataFrame, x_column: str = "degrees") -> Figure:
        """ dataframe -> figure, mean with std error bars, one panel per metric """
        fig = px.line(info, x=x_column, y="value", error_y="std", color="type_",
                      facet_row="type_", markers=True)
        fig.update_yaxes(matches=None)
        return fig

    @staticmethod
    def build_history_figure(history: DataFrame) -> Figure:
        columns = [col for col in ["train_loss", "val_loss"]
                   if col in history and history[col].notna().any()]
        fig = px.line(history, x="epoch", y=columns, log_y=True)
        return fig

    @staticmethod
    def save_fig(fig: Figure, path: str):
        """ fig -> dynamic html """
        fig.write_html(path)

    def __call__(self, summary: DataFrame, save_folder: str, x_column: str = "degrees",
                 name: str = "sweep"):
        dataframe = self.build_df_from_output(summary, x_column=x_column)
        self.save_fig(fig=self.build_figure(dataframe, x_column=x_column),
                      path=f"{save_folder}/{name}.html")
